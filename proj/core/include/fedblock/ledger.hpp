#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fedblock/clients.hpp"
#include "fedblock/digest.hpp"
#include "fedblock/nn.hpp"
#include "fedblock/types.hpp"

namespace fedblock {

struct TrustEntry {
  double score = 1.0;       // S_i
  std::uint64_t count = 0;  // t_i
  std::uint64_t score_halves = 0;  // sum of received scores, in units of 1/2
};

/// Long-term trust per client: the running mean of every verification score
/// received, starting at 1 with no scores.
class TrustLedger {
 public:
  TrustLedger() = default;
  explicit TrustLedger(std::size_t n_clients);

  void register_client(ClientId id);
  bool contains(ClientId id) const { return entries_.count(id) != 0; }

  /// t_i += 1, then S_i <- ((t_i - 1) S_i + s) / t_i. The sum is kept in
  /// exact half-units, so S_i is the correctly rounded mean of the history.
  /// Throws DomainError for s outside {0, 1/2, 1}, RegistryError for an
  /// unknown client.
  void update(ClientId id, double s);

  double trust(ClientId id) const { return entry(id).score; }
  const TrustEntry& entry(ClientId id) const;
  const std::map<ClientId, TrustEntry>& entries() const { return entries_; }
  std::vector<ClientId> clients() const;
  std::map<ClientId, double> snapshot() const;

 private:
  std::map<ClientId, TrustEntry> entries_;
};

/// Content-addressed blob store standing in for off-chain hosting.
class OffchainStore {
 public:
  /// Stores bytes under their own digest.
  Digest put(std::vector<std::uint8_t> bytes);
  /// Stores bytes under an address chosen by the uploader; nothing is
  /// checked until the blob is fetched.
  void put_at(const Digest& address, std::vector<std::uint8_t> bytes);
  /// Throws IntegrityError if the address is unknown or the bytes no longer
  /// hash to it.
  const std::vector<std::uint8_t>& fetch(const Digest& address) const;

  bool contains(const Digest& address) const { return blobs_.count(address) != 0; }
  std::size_t size() const { return blobs_.size(); }
  /// Direct access to stored bytes, e.g. to simulate a misbehaving host.
  std::vector<std::uint8_t>& mutable_blob(const Digest& address);

 private:
  std::map<Digest, std::vector<std::uint8_t>> blobs_;
};

enum class EventKind {
  ModelSubmitted,
  QueueFull,
  GlobalUpdated,
  VerificationRequested,
  ScoresReceived,
  VerifierShortfall,
  DegenerateAggregation,
};

std::string_view to_string(EventKind kind);

struct Event {
  int round = 0;
  EventKind kind{};
  std::optional<ClientId> client;
  std::optional<Digest> digest;
  friend bool operator==(const Event&, const Event&) = default;
};

/// One JSON object per line: {"round", "event", "client", "digest"}.
std::string to_json_line(const Event& e);
void write_event_log(std::ostream& out, const std::vector<Event>& events);

enum class VerifierPolicy { open, caav };

std::string_view to_string(VerifierPolicy p);
VerifierPolicy parse_verifier_policy(std::string_view name);

struct ContractState {
  std::size_t capacity = 1;  // K
  std::vector<Submission> queue;
  Digest global_digest;
  std::vector<ClientId> verification_set;
  int round = 0;
  std::vector<Event> events;
};

/// Simulated aggregation contract. Single writer: one coordinator drives it.
class Contract {
 public:
  /// Publishes `initial` to the store and records its digest.
  Contract(std::size_t queue_capacity, ModelParams initial, OffchainStore& store);

  /// Accepts a submission whose digest matches the bytes the client placed
  /// in the store. Throws IntegrityError (nothing logged) otherwise.
  void submit(const OffchainStore& store, Submission sub);

  bool queue_full() const { return state_.queue.size() == state_.capacity; }

  /// Trust- and size-weighted mean of the queued models (fetched from the
  /// store). Empties the queue and publishes the new global. If every
  /// weight is zero the global is kept, the queue emptied, the event logged,
  /// and DegenerateAggregationError thrown.
  const ModelParams& aggregate(const TrustLedger& ledger, OffchainStore& store);

  /// Size-weighted mean: `aggregate` with every trust forced to 1.
  const ModelParams& fedavg_aggregate(OffchainStore& store);

  /// Queued submitters when M equals the queue length, otherwise M clients
  /// drawn uniformly from the ledger.
  const std::vector<ClientId>& select_verification_set(const TrustLedger& ledger, std::size_t M,
                                                       std::uint64_t seed);

  /// V verifiers drawn uniformly: from every client (open) or from clients
  /// with trust strictly above 1/2 (caav). A short pool returns everyone
  /// eligible and logs VerifierShortfall.
  std::vector<ClientId> select_verifiers(const TrustLedger& ledger, std::size_t V, VerifierPolicy policy,
                                         std::uint64_t seed);

  /// Applies a verifier's scores to the ledger in client-id order.
  void record_scores(TrustLedger& ledger, const ScoreReport& report);

  const ContractState& state() const { return state_; }
  const ModelParams& global_model() const { return global_; }
  /// Starts the next logical round (stamps subsequent events).
  void advance_round() { ++state_.round; }

 private:
  const ModelParams& aggregate_weighted(const TrustLedger* ledger, OffchainStore& store);
  void log(EventKind kind, std::optional<ClientId> client = std::nullopt,
           std::optional<Digest> digest = std::nullopt);

  ContractState state_;
  ModelParams global_;
};

}  // namespace fedblock

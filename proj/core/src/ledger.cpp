#include "fedblock/ledger.hpp"

#include <algorithm>
#include <json.hpp>
#include <string>

#include "fedblock/errors.hpp"
#include "fedblock/rng.hpp"

namespace fedblock {

TrustLedger::TrustLedger(std::size_t n_clients) {
  for (std::size_t i = 0; i < n_clients; ++i) register_client(ClientId{static_cast<std::uint32_t>(i)});
}

void TrustLedger::register_client(ClientId id) { entries_.try_emplace(id); }

void TrustLedger::update(ClientId id, double s) {
  if (s != 0.0 && s != 0.5 && s != 1.0) throw DomainError("update_trust: score must be 0, 1/2 or 1");
  auto it = entries_.find(id);
  if (it == entries_.end()) throw RegistryError("update_trust: unknown client " + std::to_string(id.value));
  auto& e = it->second;
  e.count += 1;
  e.score_halves += static_cast<std::uint64_t>(s * 2.0);
  e.score = static_cast<double>(e.score_halves) / (2.0 * static_cast<double>(e.count));
}

const TrustEntry& TrustLedger::entry(ClientId id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw RegistryError("trust ledger: unknown client " + std::to_string(id.value));
  return it->second;
}

std::vector<ClientId> TrustLedger::clients() const {
  std::vector<ClientId> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, _] : entries_) ids.push_back(id);
  return ids;
}

std::map<ClientId, double> TrustLedger::snapshot() const {
  std::map<ClientId, double> out;
  for (const auto& [id, e] : entries_) out.emplace(id, e.score);
  return out;
}

Digest OffchainStore::put(std::vector<std::uint8_t> bytes) {
  const Digest d = sha256(bytes);
  blobs_[d] = std::move(bytes);
  return d;
}

void OffchainStore::put_at(const Digest& address, std::vector<std::uint8_t> bytes) {
  blobs_[address] = std::move(bytes);
}

const std::vector<std::uint8_t>& OffchainStore::fetch(const Digest& address) const {
  auto it = blobs_.find(address);
  if (it == blobs_.end()) throw IntegrityError("off-chain store: no blob at " + address.hex());
  if (sha256(it->second) != address) {
    throw IntegrityError("off-chain store: blob at " + address.hex() + " fails its hash check");
  }
  return it->second;
}

std::vector<std::uint8_t>& OffchainStore::mutable_blob(const Digest& address) {
  auto it = blobs_.find(address);
  if (it == blobs_.end()) throw IntegrityError("off-chain store: no blob at " + address.hex());
  return it->second;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::ModelSubmitted:
      return "ModelSubmitted";
    case EventKind::QueueFull:
      return "QueueFull";
    case EventKind::GlobalUpdated:
      return "GlobalUpdated";
    case EventKind::VerificationRequested:
      return "VerificationRequested";
    case EventKind::ScoresReceived:
      return "ScoresReceived";
    case EventKind::VerifierShortfall:
      return "VerifierShortfall";
    case EventKind::DegenerateAggregation:
      return "DegenerateAggregation";
  }
  return "Unknown";
}

std::string to_json_line(const Event& e) {
  nlohmann::ordered_json j;
  j["round"] = e.round;
  j["event"] = std::string(to_string(e.kind));
  j["client"] = e.client ? nlohmann::ordered_json(e.client->value) : nlohmann::ordered_json(nullptr);
  j["digest"] = e.digest ? nlohmann::ordered_json(e.digest->hex()) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

void write_event_log(std::ostream& out, const std::vector<Event>& events) {
  for (const auto& e : events) out << to_json_line(e) << '\n';
}

std::string_view to_string(VerifierPolicy p) { return p == VerifierPolicy::open ? "open" : "caav"; }

VerifierPolicy parse_verifier_policy(std::string_view name) {
  if (name == "open") return VerifierPolicy::open;
  if (name == "caav") return VerifierPolicy::caav;
  throw ConfigError("unknown verifier policy '" + std::string(name) + "'");
}

Contract::Contract(std::size_t queue_capacity, ModelParams initial, OffchainStore& store)
    : global_(std::move(initial)) {
  if (queue_capacity == 0) throw DomainError("contract: queue capacity must be positive");
  state_.capacity = queue_capacity;
  state_.global_digest = store.put(serialize(global_));
}

void Contract::log(EventKind kind, std::optional<ClientId> client, std::optional<Digest> digest) {
  state_.events.push_back(Event{state_.round, kind, client, digest});
}

void Contract::submit(const OffchainStore& store, Submission sub) {
  if (queue_full()) throw DomainError("submit: aggregation queue is full");
  const auto& bytes = store.fetch(sub.model_digest);  // integrity check
  if (!sub.model.same_architecture(global_)) throw ShapeError("submit: model architecture mismatch");
  if (sha256(serialize(sub.model)) != sub.model_digest) {
    throw IntegrityError("submit: submitted model does not match its digest");
  }
  (void)bytes;
  const ClientId client = sub.client;
  const Digest digest = sub.model_digest;
  state_.queue.push_back(std::move(sub));
  log(EventKind::ModelSubmitted, client, digest);
  if (queue_full()) log(EventKind::QueueFull);
}

const ModelParams& Contract::aggregate(const TrustLedger& ledger, OffchainStore& store) {
  return aggregate_weighted(&ledger, store);
}

const ModelParams& Contract::fedavg_aggregate(OffchainStore& store) { return aggregate_weighted(nullptr, store); }

const ModelParams& Contract::aggregate_weighted(const TrustLedger* ledger, OffchainStore& store) {
  if (!queue_full()) throw DomainError("aggregate: queue is not full");

  std::vector<double> weights;
  weights.reserve(state_.queue.size());
  double total = 0.0;
  for (const auto& sub : state_.queue) {
    const double trust = ledger ? ledger->trust(sub.client) : 1.0;
    weights.push_back(trust * static_cast<double>(sub.data_size));
    total += weights.back();
  }

  if (!(total > 0.0)) {
    state_.queue.clear();
    log(EventKind::DegenerateAggregation);
    throw DegenerateAggregationError("aggregate: every aggregation weight is zero; global model kept");
  }

  ModelParams next = zeros_like(global_);
  for (std::size_t i = 0; i < state_.queue.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const ModelParams local = deserialize(store.fetch(state_.queue[i].model_digest));
    add_scaled(next, local, weights[i] / total);
  }
  if (!next.all_finite()) throw NumericalError("aggregate: non-finite global model");

  state_.queue.clear();
  global_ = std::move(next);
  state_.global_digest = store.put(serialize(global_));
  log(EventKind::GlobalUpdated, std::nullopt, state_.global_digest);
  return global_;
}

const std::vector<ClientId>& Contract::select_verification_set(const TrustLedger& ledger, std::size_t M,
                                                               std::uint64_t seed) {
  const auto population = ledger.clients();
  if (M == 0 || M > population.size()) {
    throw DomainError("select_verification_set: M must lie in [1, " + std::to_string(population.size()) + "]");
  }
  std::vector<ClientId> chosen;
  if (!state_.queue.empty() && M == state_.queue.size()) {
    for (const auto& sub : state_.queue) chosen.push_back(sub.client);
  } else {
    Rng rng(seed);
    for (std::size_t i : rng.sample_indices(population.size(), M)) chosen.push_back(population[i]);
  }
  std::sort(chosen.begin(), chosen.end());
  state_.verification_set = std::move(chosen);
  for (ClientId id : state_.verification_set) log(EventKind::VerificationRequested, id);
  return state_.verification_set;
}

std::vector<ClientId> Contract::select_verifiers(const TrustLedger& ledger, std::size_t V, VerifierPolicy policy,
                                                 std::uint64_t seed) {
  std::vector<ClientId> eligible;
  for (const auto& [id, e] : ledger.entries()) {
    if (policy == VerifierPolicy::open || e.score > 0.5) eligible.push_back(id);
  }
  if (eligible.size() <= V) {
    if (eligible.size() < V) log(EventKind::VerifierShortfall);
    return eligible;
  }
  Rng rng(seed);
  std::vector<ClientId> chosen;
  for (std::size_t i : rng.sample_indices(eligible.size(), V)) chosen.push_back(eligible[i]);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

void Contract::record_scores(TrustLedger& ledger, const ScoreReport& report) {
  for (const auto& [client, s] : report.scores) {
    if (!ledger.contains(client)) throw RegistryError("record_scores: unknown client " + std::to_string(client.value));
    if (s != 0.0 && s != 0.5 && s != 1.0) throw DomainError("record_scores: score must be 0, 1/2 or 1");
  }
  for (const auto& [client, s] : report.scores) ledger.update(client, s);
  log(EventKind::ScoresReceived, report.verifier);
}

}  // namespace fedblock

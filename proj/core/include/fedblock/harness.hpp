#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedblock/clients.hpp"
#include "fedblock/data.hpp"
#include "fedblock/defense.hpp"
#include "fedblock/ledger.hpp"
#include "fedblock/nn.hpp"

namespace fedblock {

struct SimConfig {
  // Population and verification sizes.
  std::size_t n_clients = 40;  // N
  std::size_t queue_size = 10;  // K
  std::size_t verification_set_size = 10;  // M
  std::size_t verifiers = 5;  // V
  std::size_t clients_per_verifier = 4;  // L
  std::size_t rounds = 100;  // T
  /// Regenerate the verification set every this many rounds.
  std::size_t verification_regen_every = 1;

  // Adversary.
  double attacker_ratio = 0.0;  // epsilon
  AttackStrategy attack = AttackStrategy::blackbox;
  double pdr = 0.33;
  int target_class = 0;
  std::vector<std::size_t> trigger_coords = {2, 3};
  double trigger_value = 3.5;
  bool edge_case = false;
  double gamma = 0.0;  // 0: use K
  double delta = 0.0;  // 0: delta_scale * median benign warm-up update norm
  double delta_scale = 0.8;

  // Verification.
  bool defense = true;
  VerifierPolicy verifier_policy = VerifierPolicy::open;
  double bad_verifier_fraction = 0.0;  // p
  CorruptionMode corruption = CorruptionMode::reverse;
  bool verify_lag = false;
  /// Replace every honest verification score with this value.
  std::optional<double> forced_score;

  // Data and model.
  double non_iid_degree = 0.5;  // phi
  std::size_t features = 20;
  std::size_t classes = 5;
  std::size_t per_client_size = 200;
  std::size_t test_size = 2000;
  double separation = 3.5;
  std::size_t hidden_width = 32;
  std::optional<std::filesystem::path> data_csv;
  TrainConfig train{0.01, 3, 20, 0};

  std::uint64_t seed = 1;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const SimConfig& cfg);

/// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
SimConfig parse_config(const std::string& text);
SimConfig load_config(const std::filesystem::path& path);
/// Inverse of parse_config (every key, canonical formatting).
std::map<std::string, std::string> config_entries(const SimConfig& cfg);

struct RoundMetrics {
  int round = 0;
  double ma = 0.0;
  double ba = 0.0;
  std::optional<double> tpr;
  std::optional<double> tnr;
  double wall_time = 0.0;  // seconds
};

struct SimResult {
  std::vector<RoundMetrics> rounds;
  std::vector<Digest> global_digests;  // after each round
  ModelParams final_model;
  std::vector<Event> events;
  /// Score reports applied to the ledger, per round.
  std::vector<std::vector<ScoreReport>> reports;
  std::set<ClientId> attackers;
  std::set<ClientId> bad_verifiers;
  std::map<ClientId, TrustEntry> trust;
  double delta = 0.0;
  double gamma = 0.0;
};

/// Runs the configured number of rounds. Deterministic in cfg.seed, apart
/// from wall_time.
SimResult run(const SimConfig& cfg);

/// Fraction of argmax-correct predictions. Throws DomainError when empty.
double eval_ma(const ModelParams& model, std::span<const Sample> test);
/// Fraction of triggered samples predicted as `target`.
double eval_ba(const ModelParams& model, std::span<const Sample> triggered, int target);

struct DetectionRates {
  std::optional<double> tpr;
  std::optional<double> tnr;
};

/// A client is flagged when its trust is strictly below 1/2.
DetectionRates eval_detection(std::span<const ClientId> queue, const TrustLedger& ledger,
                              const std::set<ClientId>& attackers);

/// Writes rounds.csv, summary.json and events.jsonl under `dir`.
void emit(const SimResult& result, const SimConfig& cfg, const std::filesystem::path& dir);

std::string rounds_csv(const std::vector<RoundMetrics>& rounds);

}  // namespace fedblock

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "fedblock/data.hpp"
#include "fedblock/digest.hpp"
#include "fedblock/nn.hpp"
#include "fedblock/types.hpp"

namespace fedblock {

enum class AttackStrategy { none, blackbox, pgd, pgd_mr };

std::string_view to_string(AttackStrategy a);
AttackStrategy parse_attack(std::string_view name);

struct ClientProfile {
  ClientId id{};
  Dataset dataset;
  AttackStrategy attack = AttackStrategy::none;
  std::optional<PoisonSpec> poison_spec;
  /// Fixes which local samples carry the trigger across rounds.
  std::uint64_t poison_seed = 0;

  bool is_malicious() const { return attack != AttackStrategy::none; }
  std::size_t size() const { return dataset.size(); }
};

/// Model-poisoning knobs: replacement scale and projection radius.
struct AttackParams {
  double gamma = 1.0;
  double delta = 1.0;
};

struct Submission {
  ClientId client{};
  ModelParams model;
  UltimateGradient ug;
  std::size_t data_size = 0;
  Digest model_digest;
  int round = 0;
};

/// Packs a trained model into a submission, hashing its canonical bytes.
Submission make_submission(ClientId client, ModelParams model, const ModelParams& global,
                           double learning_rate, std::size_t data_size, int round);

/// One local training round. Benign clients run SGD from `global` on their
/// own data; attackers train on poisoned data, then apply their model
/// poisoning step (pgd: project; pgd_mr: replace, then project).
Submission local_round(const ClientProfile& profile, const ModelParams& global, const TrainConfig& cfg,
                       const AttackParams& attack, int round);

/// Projects `local` onto the L2 ball of radius delta around `global`.
ModelParams pgd_project(const ModelParams& local, const ModelParams& global, double delta);

/// global + gamma * (local - global)
ModelParams model_replace(const ModelParams& local, const ModelParams& global, double gamma);

}  // namespace fedblock

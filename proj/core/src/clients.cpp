#include "fedblock/clients.hpp"

#include <string>

#include "fedblock/errors.hpp"

namespace fedblock {

std::string_view to_string(AttackStrategy a) {
  switch (a) {
    case AttackStrategy::none:
      return "none";
    case AttackStrategy::blackbox:
      return "blackbox";
    case AttackStrategy::pgd:
      return "pgd";
    case AttackStrategy::pgd_mr:
      return "pgd_mr";
  }
  return "none";
}

AttackStrategy parse_attack(std::string_view name) {
  if (name == "none") return AttackStrategy::none;
  if (name == "blackbox") return AttackStrategy::blackbox;
  if (name == "pgd") return AttackStrategy::pgd;
  if (name == "pgd_mr") return AttackStrategy::pgd_mr;
  throw ConfigError("unknown attack strategy '" + std::string(name) + "'");
}

Submission make_submission(ClientId client, ModelParams model, const ModelParams& global,
                           double learning_rate, std::size_t data_size, int round) {
  Submission sub;
  sub.client = client;
  sub.ug = extract_ultimate_gradient(global, model, learning_rate, client, round);
  sub.model_digest = sha256(serialize(model));
  sub.model = std::move(model);
  sub.data_size = data_size;
  sub.round = round;
  return sub;
}

Submission local_round(const ClientProfile& profile, const ModelParams& global, const TrainConfig& cfg,
                       const AttackParams& attack, int round) {
  if (profile.dataset.empty()) throw DomainError("local_round: client has no data");
  if (profile.dataset.front().x.size() != global.input_dim()) {
    throw ShapeError("local_round: client data does not match the model input");
  }

  ModelParams local;
  try {
    if (!profile.is_malicious()) {
      local = sgd_train(global, profile.dataset, cfg);
    } else {
      if (!profile.poison_spec) throw DomainError("local_round: malicious client without a poison spec");
      const auto poisoned = poison(profile.dataset, *profile.poison_spec, profile.poison_seed);
      local = sgd_train(global, poisoned.data, cfg);
      if (profile.attack == AttackStrategy::pgd_mr) local = model_replace(local, global, attack.gamma);
      if (profile.attack == AttackStrategy::pgd || profile.attack == AttackStrategy::pgd_mr) {
        local = pgd_project(local, global, attack.delta);
      }
    }
  } catch (const NumericalError& e) {
    throw NumericalError("round " + std::to_string(round) + ", client " + std::to_string(profile.id.value) +
                         ": " + e.what());
  }

  // The reported gradient is always relative to the received global model,
  // so it is only defined for a positive learning rate.
  const double eta = cfg.learning_rate > 0.0 ? cfg.learning_rate : 1.0;
  return make_submission(profile.id, std::move(local), global, eta, profile.size(), round);
}

ModelParams pgd_project(const ModelParams& local, const ModelParams& global, double delta) {
  if (!(delta > 0.0)) throw DomainError("pgd_project: radius must be positive");
  ModelParams diff = difference(local, global);
  const double norm = l2_norm(diff);
  // Relative slack so an already-projected model is a fixed point.
  if (norm <= delta * (1.0 + 1e-12)) return local;
  ModelParams out = global;
  add_scaled(out, diff, delta / norm);
  return out;
}

ModelParams model_replace(const ModelParams& local, const ModelParams& global, double gamma) {
  if (gamma == 1.0) return local;
  ModelParams out = global;
  add_scaled(out, difference(local, global), gamma);
  return out;
}

}  // namespace fedblock

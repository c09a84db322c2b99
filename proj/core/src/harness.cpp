#include "fedblock/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "fedblock/errors.hpp"
#include "fedblock/rng.hpp"

namespace fedblock {

namespace {

std::string round_label(std::size_t t, std::string_view what) {
  return "round:" + std::to_string(t) + ":" + std::string(what);
}

struct Population {
  std::vector<ClientProfile> profiles;
  Dataset test;
  Dataset triggered;
  PoisonSpec spec;
};

Population build_population(const SimConfig& cfg) {
  Population pop;
  pop.spec = PoisonSpec{cfg.target_class, cfg.trigger_coords, cfg.trigger_value, cfg.pdr, cfg.edge_case};

  const std::size_t needed = cfg.n_clients * cfg.per_client_size;
  Dataset pool;
  if (cfg.data_csv) {
    Dataset all = load_csv(*cfg.data_csv, cfg.features, cfg.classes);
    Rng rng(derive_seed(cfg.seed, "dataset"));
    rng.shuffle(all);
    const std::size_t test_n = std::min(cfg.test_size, all.size() / 5);
    if (test_n == 0) throw ConfigError("data file too small for a test split");
    pop.test.assign(all.end() - static_cast<std::ptrdiff_t>(test_n), all.end());
    pool.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(test_n));
  } else {
    // Headroom so per-class pools survive the random (non-dominant) draws.
    const std::size_t n = needed + needed / 4 + cfg.classes;
    pool = gen_dataset(n, cfg.classes, cfg.features, derive_seed(cfg.seed, "dataset"), cfg.separation);
    pop.test = gen_dataset(cfg.test_size, cfg.classes, cfg.features, derive_seed(cfg.seed, "testset"), cfg.separation);
  }

  PartitionSpec part{cfg.n_clients, cfg.non_iid_degree, cfg.per_client_size, derive_seed(cfg.seed, "partition")};
  auto shards = partition_non_iid(pool, cfg.classes, part);

  const auto n_attackers =
      static_cast<std::size_t>(std::lround(cfg.attacker_ratio * static_cast<double>(cfg.n_clients)));
  Rng rng(derive_seed(cfg.seed, "attackers"));
  std::vector<bool> malicious(cfg.n_clients, false);
  for (std::size_t i : rng.sample_indices(cfg.n_clients, n_attackers)) malicious[i] = true;

  for (std::size_t i = 0; i < cfg.n_clients; ++i) {
    ClientProfile p;
    p.id = ClientId{static_cast<std::uint32_t>(i)};
    p.dataset = std::move(shards[i]);
    if (malicious[i]) {
      p.attack = cfg.attack;
      p.poison_spec = pop.spec;
      p.poison_seed = derive_seed(cfg.seed, "poison:" + std::to_string(i));
    }
    pop.profiles.push_back(std::move(p));
  }
  pop.triggered = triggered_testset(pop.test, pop.spec);
  return pop;
}

double warmup_delta(const SimConfig& cfg, const Population& pop, const ModelParams& global) {
  std::vector<double> norms;
  for (const auto& p : pop.profiles) {
    if (p.is_malicious()) continue;
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "warmup:" + std::to_string(p.id.value));
    norms.push_back(l2_norm(difference(sgd_train(global, p.dataset, tc), global)));
  }
  if (norms.empty()) return 1.0;
  std::sort(norms.begin(), norms.end());
  const std::size_t n = norms.size();
  const double median = n % 2 == 1 ? norms[n / 2] : 0.5 * (norms[n / 2 - 1] + norms[n / 2]);
  return median > 0.0 ? cfg.delta_scale * median : 1.0;
}

std::set<ClientId> choose_bad_verifiers(const SimConfig& cfg, const std::vector<ClientProfile>& profiles) {
  // Compromised clients misbehave as verifiers first. Under open selection the
  // remainder of the quota is drawn from honest clients; client-as-verifier
  // admits only clients, whose benign members verify honestly.
  std::vector<ClientId> attackers, honest;
  for (const auto& p : profiles) (p.is_malicious() ? attackers : honest).push_back(p.id);
  Rng rng(derive_seed(cfg.seed, "bad_verifiers"));
  rng.shuffle(attackers);
  rng.shuffle(honest);
  if (cfg.verifier_policy == VerifierPolicy::caav) honest.clear();
  attackers.insert(attackers.end(), honest.begin(), honest.end());
  const auto quota = static_cast<std::size_t>(
      std::lround(cfg.bad_verifier_fraction * static_cast<double>(cfg.n_clients)));
  return {attackers.begin(), attackers.begin() + static_cast<std::ptrdiff_t>(std::min(quota, attackers.size()))};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate(const SimConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.n_clients == 0) fail("N must be positive");
  if (cfg.queue_size == 0 || cfg.queue_size > cfg.n_clients) fail("K must lie in [1, N]");
  if (cfg.rounds == 0) fail("rounds must be positive");
  if (!(cfg.attacker_ratio >= 0.0 && cfg.attacker_ratio <= 1.0)) fail("attacker_ratio must lie in [0, 1]");
  if (!(cfg.non_iid_degree >= 0.0 && cfg.non_iid_degree <= 1.0)) fail("non_iid must lie in [0, 1]");
  if (!(cfg.pdr >= 0.0 && cfg.pdr <= 1.0)) fail("pdr must lie in [0, 1]");
  if (!(cfg.bad_verifier_fraction >= 0.0 && cfg.bad_verifier_fraction <= 1.0)) {
    fail("bad_verifier_fraction must lie in [0, 1]");
  }
  if (cfg.classes < 2) fail("classes must be at least 2");
  if (cfg.features == 0) fail("features must be positive");
  if (cfg.per_client_size == 0) fail("per_client_size must be positive");
  if (cfg.test_size == 0) fail("test_size must be positive");
  if (cfg.target_class < 0 || static_cast<std::size_t>(cfg.target_class) >= cfg.classes) {
    fail("target_class out of range");
  }
  if (cfg.trigger_coords.empty()) fail("trigger_coords must be nonempty");
  for (std::size_t c : cfg.trigger_coords) {
    if (c >= cfg.features) fail("trigger coordinate out of range");
  }
  if (!(cfg.train.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (cfg.train.local_epochs == 0 || cfg.train.batch_size == 0) fail("local_epochs and batch_size must be positive");
  if (cfg.gamma < 0.0 || cfg.delta < 0.0 || !(cfg.delta_scale > 0.0)) fail("gamma, delta and delta_scale must be non-negative");
  if (cfg.defense) {
    if (cfg.verification_set_size == 0 || cfg.verification_set_size > cfg.n_clients) fail("M must lie in [1, N]");
    if (cfg.verifiers == 0) fail("V must be positive");
    if (cfg.clients_per_verifier < 2 || cfg.clients_per_verifier > cfg.verification_set_size) {
      fail("L must lie in [2, M]");
    }
    if (cfg.verification_regen_every == 0) fail("verification_regen_every must be positive");
  }
  if (cfg.forced_score && *cfg.forced_score != 0.0 && *cfg.forced_score != 0.5 && *cfg.forced_score != 1.0) {
    fail("forced_score must be 0, 0.5 or 1");
  }
}

double eval_ma(const ModelParams& model, std::span<const Sample> test) {
  if (test.empty()) throw DomainError("eval_ma: empty test set");
  std::size_t correct = 0;
  for (const auto& s : test) correct += predict(model, s.x) == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double eval_ba(const ModelParams& model, std::span<const Sample> triggered, int target) {
  if (triggered.empty()) throw DomainError("eval_ba: empty triggered set");
  std::size_t hits = 0;
  for (const auto& s : triggered) hits += predict(model, s.x) == target ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(triggered.size());
}

DetectionRates eval_detection(std::span<const ClientId> queue, const TrustLedger& ledger,
                              const std::set<ClientId>& attackers) {
  std::size_t attackers_seen = 0, flagged_attackers = 0, benign_seen = 0, clear_benign = 0;
  for (ClientId id : queue) {
    const bool flagged = ledger.trust(id) < 0.5;
    if (attackers.count(id)) {
      ++attackers_seen;
      flagged_attackers += flagged ? 1 : 0;
    } else {
      ++benign_seen;
      clear_benign += flagged ? 0 : 1;
    }
  }
  DetectionRates r;
  if (attackers_seen) r.tpr = static_cast<double>(flagged_attackers) / static_cast<double>(attackers_seen);
  if (benign_seen) r.tnr = static_cast<double>(clear_benign) / static_cast<double>(benign_seen);
  return r;
}

SimResult run(const SimConfig& cfg) {
  validate(cfg);
  Population pop = build_population(cfg);

  std::vector<std::size_t> widths = {cfg.features};
  if (cfg.hidden_width > 0) widths.push_back(cfg.hidden_width);
  widths.push_back(cfg.classes);
  const ModelParams initial = init_mlp(widths, derive_seed(cfg.seed, "init"));

  SimResult result;
  for (const auto& p : pop.profiles)
    if (p.is_malicious()) result.attackers.insert(p.id);
  result.bad_verifiers = choose_bad_verifiers(cfg, pop.profiles);

  AttackParams attack;
  attack.gamma = cfg.gamma > 0.0 ? cfg.gamma : static_cast<double>(cfg.queue_size);
  attack.delta = cfg.delta;
  const bool projects = cfg.attack == AttackStrategy::pgd || cfg.attack == AttackStrategy::pgd_mr;
  if (attack.delta == 0.0) attack.delta = projects && !result.attackers.empty() ? warmup_delta(cfg, pop, initial) : 1.0;
  result.delta = attack.delta;
  result.gamma = attack.gamma;

  OffchainStore store;
  Contract contract(cfg.queue_size, initial, store);
  TrustLedger ledger(cfg.n_clients);
  std::vector<ScoreReport> pending;  // held back one round under verify_lag

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();
    contract.advance_round();
    const ModelParams global = contract.global_model();
    const int round = static_cast<int>(t);

    Rng sampler(derive_seed(cfg.seed, round_label(t, "sample")));
    auto picked = sampler.sample_indices(cfg.n_clients, cfg.queue_size);
    std::sort(picked.begin(), picked.end());

    std::vector<Submission> submissions;
    std::vector<ClientId> queue_clients;
    for (std::size_t i : picked) {
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(cfg.seed, round_label(t, "client:" + std::to_string(i)));
      Submission sub = local_round(pop.profiles[i], global, tc, attack, round);
      store.put_at(sub.model_digest, serialize(sub.model));
      queue_clients.push_back(sub.client);
      submissions.push_back(sub);
      contract.submit(store, std::move(sub));
    }

    try {
      if (cfg.defense) {
        if ((t - 1) % cfg.verification_regen_every == 0 || contract.state().verification_set.empty()) {
          contract.select_verification_set(ledger, cfg.verification_set_size,
                                           derive_seed(cfg.seed, round_label(t, "verification_set")));
        }
        // Only clients with a submission in this round's queue can be scored.
        std::vector<ClientId> verifiable;
        for (ClientId id : contract.state().verification_set) {
          if (std::binary_search(queue_clients.begin(), queue_clients.end(), id)) verifiable.push_back(id);
        }
        const auto verifiers = contract.select_verifiers(ledger, cfg.verifiers, cfg.verifier_policy,
                                                         derive_seed(cfg.seed, round_label(t, "verifiers")));
        std::vector<ScoreReport> reports;
        if (verifiable.size() >= 2) {
          const std::size_t L = std::min(cfg.clients_per_verifier, verifiable.size());
          const auto assignment = assign_clients_to_verifiers(verifiable, verifiers, L,
                                                              derive_seed(cfg.seed, round_label(t, "assign")));
          const auto trust = ledger.snapshot();
          for (const auto& [verifier, clients] : assignment) {
            std::vector<Submission> chosen;
            for (ClientId c : clients) {
              auto it = std::lower_bound(queue_clients.begin(), queue_clients.end(), c);
              chosen.push_back(submissions[static_cast<std::size_t>(it - queue_clients.begin())]);
            }
            ScoreReport report;
            if (cfg.forced_score) {
              report = ScoreReport{verifier, round, {}};
              for (ClientId c : clients) report.scores[c] = *cfg.forced_score;
            } else {
              report = verify(make_task(verifier, round, chosen, global, cfg.train.learning_rate, trust));
            }
            if (result.bad_verifiers.count(verifier)) {
              report = corrupt_report(report, cfg.corruption,
                                      derive_seed(cfg.seed, round_label(t, "corrupt:" + std::to_string(verifier.value))));
            }
            reports.push_back(std::move(report));
          }
        }
        if (cfg.verify_lag) std::swap(reports, pending);
        for (const auto& r : reports) contract.record_scores(ledger, r);
        result.reports.push_back(reports);
        contract.aggregate(ledger, store);
      } else {
        result.reports.emplace_back();
        contract.fedavg_aggregate(store);
      }
    } catch (const DegenerateAggregationError&) {
      // Global model frozen for this round; the contract logged the event.
    }

    RoundMetrics m;
    m.round = round;
    m.ma = eval_ma(contract.global_model(), pop.test);
    m.ba = pop.triggered.empty() ? 0.0 : eval_ba(contract.global_model(), pop.triggered, cfg.target_class);
    const auto det = eval_detection(queue_clients, ledger, result.attackers);
    m.tpr = det.tpr;
    m.tnr = det.tnr;
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.rounds.push_back(m);
    result.global_digests.push_back(contract.state().global_digest);
  }

  result.final_model = contract.global_model();
  result.events = contract.state().events;
  result.trust = ledger.entries();
  return result;
}

std::string rounds_csv(const std::vector<RoundMetrics>& rounds) {
  std::ostringstream out;
  out << "round,MA,BA,TPR,TNR,wall_time\n";
  for (const auto& m : rounds) {
    out << m.round << ',' << format_double(m.ma) << ',' << format_double(m.ba) << ','
        << (m.tpr ? format_double(*m.tpr) : "") << ',' << (m.tnr ? format_double(*m.tnr) : "") << ','
        << format_double(m.wall_time) << '\n';
  }
  return out.str();
}

void emit(const SimResult& result, const SimConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
  };

  {
    auto f = open(dir / "rounds.csv");
    f << rounds_csv(result.rounds);
    if (!f) throw IoError("write failed: rounds.csv");
  }
  {
    auto f = open(dir / "events.jsonl");
    write_event_log(f, result.events);
    if (!f) throw IoError("write failed: events.jsonl");
  }

  nlohmann::ordered_json summary;
  nlohmann::ordered_json config;
  for (const auto& [k, v] : config_entries(cfg)) config[k] = v;
  summary["config"] = config;
  summary["seed"] = cfg.seed;
  summary["digest_algorithm"] = std::string(kDigestAlgorithm);
  summary["rounds"] = result.rounds.size();
  summary["attackers"] = result.attackers.size();
  summary["gamma"] = result.gamma;
  summary["delta"] = result.delta;
  nlohmann::ordered_json final_metrics;
  if (!result.rounds.empty()) {
    const auto& last = result.rounds.back();
    final_metrics["MA"] = last.ma;
    final_metrics["BA"] = last.ba;
    final_metrics["TPR"] = last.tpr ? nlohmann::ordered_json(*last.tpr) : nlohmann::ordered_json(nullptr);
    final_metrics["TNR"] = last.tnr ? nlohmann::ordered_json(*last.tnr) : nlohmann::ordered_json(nullptr);
  }
  summary["final"] = final_metrics;
  summary["final_global_digest"] = result.global_digests.empty() ? "" : result.global_digests.back().hex();
  double total_time = 0.0;
  for (const auto& m : result.rounds) total_time += m.wall_time;
  summary["wall_time"] = {{"mean_round_seconds", result.rounds.empty() ? 0.0 : total_time / static_cast<double>(result.rounds.size())}};

  auto f = open(dir / "summary.json");
  f << summary.dump(2) << '\n';
  if (!f) throw IoError("write failed: summary.json");
}

}  // namespace fedblock

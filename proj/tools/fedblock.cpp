// fedblock: run simulations and evaluate verifier-coverage plans.
//
//   fedblock run --config sim.cfg --out results/ [--seed 7] [--data data.csv]
//   fedblock plan --M 30 --V 15
//   fedblock plan --M 30 --L 7

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "fedblock/errors.hpp"
#include "fedblock/harness.hpp"
#include "fedblock/planner.hpp"

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kConfig = 2, kNumerical = 3, kIo = 4 };

int exit_code_for(const fedblock::Error& e) {
  const std::string category = e.category();
  if (category == "config" || category == "domain") return kConfig;
  if (category == "numerical" || category == "degenerate") return kNumerical;
  if (category == "io" || category == "integrity") return kIo;
  return kOther;
}

int run_command(const std::optional<std::string>& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed, const std::optional<std::string>& data) {
  fedblock::SimConfig cfg = config_path ? fedblock::load_config(*config_path) : fedblock::SimConfig{};
  if (seed) cfg.seed = *seed;
  if (data) cfg.data_csv = *data;

  const auto result = fedblock::run(cfg);
  fedblock::emit(result, cfg, out_dir);

  const auto& last = result.rounds.back();
  std::printf("rounds=%zu MA=%.4f BA=%.4f", result.rounds.size(), last.ma, last.ba);
  if (last.tpr) std::printf(" TPR=%.3f", *last.tpr);
  if (last.tnr) std::printf(" TNR=%.3f", *last.tnr);
  std::printf("\nwrote %s/{rounds.csv,summary.json,events.jsonl}\n", out_dir.c_str());
  return kOk;
}

int plan_command(std::size_t M, std::optional<std::size_t> V, std::optional<std::size_t> L, std::size_t trials,
                 std::uint64_t seed) {
  if (V) {
    const double closed = fedblock::expected_L(M, *V);
    const auto mc = fedblock::mc_min_L(M, *V, trials, seed);
    std::printf("E[L] for M=%zu, V=%zu\n", M, *V);
    std::printf("  closed form         %.6f  (rounds to %.0f)\n", closed, std::round(closed));
    std::printf("  monte carlo         %.6f  (std error %.6f, %zu trials)\n", mc.mean, mc.std_error, mc.trials);
    const double z = mc.std_error > 0.0 ? std::abs(closed - mc.mean) / mc.std_error : 0.0;
    if (z > 3.0) {
      std::printf("  DISCREPANCY: closed form differs from monte carlo by %.1f standard errors;\n", z);
      std::printf("  the closed form sums P(L > l) from l = 1 and omits the l = 0 term (= 1).\n");
      std::printf("  with that term included: %.6f\n", fedblock::expected_min_L(M, *V));
    }
  }
  if (L) {
    const double closed = fedblock::expected_V(M, *L);
    const auto mc = fedblock::mc_coverage(M, *L, trials, seed);
    std::printf("E[V] for M=%zu, L=%zu\n", M, *L);
    std::printf("  closed form         %.6f  (rounds to %.0f)\n", closed, std::round(closed));
    std::printf("  monte carlo         %.6f  (std error %.6f, %zu trials)\n", mc.mean_draws, mc.std_error, mc.trials);
    const auto v = static_cast<std::size_t>(std::round(closed));
    std::printf("  P(covered by %zu verifiers) = %.4f\n", v, mc.coverage_probability(v));
    const double z = mc.std_error > 0.0 ? std::abs(closed - mc.mean_draws) / mc.std_error : 0.0;
    if (z > 3.0) std::printf("  DISCREPANCY: closed form differs from monte carlo by %.1f standard errors\n", z);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blockchain-coordinated federated learning simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a simulation and write per-round metrics");
  std::optional<std::string> config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data;
  run->add_option("--config", config_path, "Config file (flat key = value)")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--data", data, "CSV dataset: features then an integer label per row")->check(CLI::ExistingFile);

  auto* plan = app.add_subcommand("plan", "Expected verifier coverage: closed form vs Monte Carlo");
  std::size_t M = 0;
  std::optional<std::size_t> V, L;
  std::size_t trials = 1'000'000;
  std::uint64_t plan_seed = 1;
  plan->add_option("--M", M, "Clients to cover")->required()->check(CLI::PositiveNumber);
  auto* v_opt = plan->add_option("--V", V, "Verifier count (computes E[L])")->check(CLI::PositiveNumber);
  auto* l_opt = plan->add_option("--L", L, "Clients per verifier (computes E[V])")->check(CLI::PositiveNumber);
  plan->add_option("--trials", trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  plan->add_option("--seed", plan_seed, "Monte Carlo seed");
  v_opt->excludes(l_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, out_dir, seed, data);
    if (!V && !L) {
      std::cerr << "plan: pass --V or --L\n";
      return kConfig;
    }
    return plan_command(M, V, L, trials, plan_seed);
  } catch (const fedblock::Error& e) {
    std::cerr << "error [" << e.category() << "]: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}

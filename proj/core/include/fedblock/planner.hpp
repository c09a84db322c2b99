#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fedblock {

/// Closed-form E[L] for V verifiers covering M clients, evaluated term for
/// term as published:
///   sum_{l=1..M} sum_{s=1..M} C(M,s) (-1)^{s+1} [C(M-s,l) / C(M,l)]^V
/// The inner sum is P(V random l-subsets miss someone). The outer sum starts
/// at l = 1, so it omits the always-one l = 0 term of the tail-sum identity;
/// see expected_min_L for the expectation of the coverage threshold itself.
double expected_L(std::size_t M, std::size_t V);

/// E[min l such that V nested random l-subsets cover M] = 1 + expected_L.
double expected_min_L(std::size_t M, std::size_t V);

/// Closed-form E[V]: expected number of uniform L-subsets drawn until all M
/// clients are covered,
///   C(M,L) sum_{s=1..M} (-1)^{s+1} C(M,s) / (C(M,L) - C(M-s,L)).
double expected_V(std::size_t M, std::size_t L);

/// Harmonic number H_n.
double harmonic(std::size_t n);

struct CoverageEstimate {
  double mean_draws = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  /// draws_histogram[k] = number of trials that needed exactly k draws.
  std::vector<std::size_t> draws_histogram;

  /// Empirical P(V draws cover everything).
  double coverage_probability(std::size_t V) const;
};

/// Monte Carlo: draw uniform L-subsets of M until the union is everything.
CoverageEstimate mc_coverage(std::size_t M, std::size_t L, std::size_t trials, std::uint64_t seed);

struct MinLEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

/// Monte Carlo for the coverage threshold: every verifier holds a random
/// ordering of the M clients and verifies a prefix of it; the threshold is
/// the smallest prefix length at which the V prefixes cover everything.
MinLEstimate mc_min_L(std::size_t M, std::size_t V, std::size_t trials, std::uint64_t seed);

}  // namespace fedblock

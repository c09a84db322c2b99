#include "fedblock/planner.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedblock/errors.hpp"
#include "fedblock/rng.hpp"

namespace fedblock {

namespace {

namespace mp = boost::multiprecision;
// 100 decimal digits: the alternating sums cancel terms as large as C(60,30).
using Real = mp::cpp_bin_float_100;

mp::cpp_int binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  mp::cpp_int r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

std::vector<Real> binomial_row(std::size_t n) {
  std::vector<Real> row(n + 1);
  for (std::size_t k = 0; k <= n; ++k) row[k] = Real(binomial(n, k));
  return row;
}

Real power(Real base, std::size_t exp) {
  Real result = 1;
  while (exp > 0) {
    if (exp & 1U) result *= base;
    base *= base;
    exp >>= 1U;
  }
  return result;
}

}  // namespace

double expected_L(std::size_t M, std::size_t V) {
  if (M == 0 || V == 0) throw DomainError("expected_L: M and V must be positive");
  const auto choose_M = binomial_row(M);
  Real total = 0;
  for (std::size_t l = 1; l <= M; ++l) {
    const Real denom(binomial(M, l));
    for (std::size_t s = 1; s <= M; ++s) {
      const mp::cpp_int num = binomial(M - s, l);
      if (num == 0) continue;
      Real term = choose_M[s] * power(Real(num) / denom, V);
      if (s % 2 == 0) term = -term;
      total += term;
    }
  }
  return total.convert_to<double>();
}

double expected_min_L(std::size_t M, std::size_t V) { return 1.0 + expected_L(M, V); }

double expected_V(std::size_t M, std::size_t L) {
  if (L == 0 || L > M) throw DomainError("expected_V: need 1 <= L <= M");
  const mp::cpp_int all = binomial(M, L);
  Real total = 0;
  for (std::size_t s = 1; s <= M; ++s) {
    const mp::cpp_int denom = all - binomial(M - s, L);
    if (denom <= 0) throw DomainError("expected_V: non-positive denominator");
    Real term = Real(binomial(M, s)) / Real(denom);
    if (s % 2 == 0) term = -term;
    total += term;
  }
  total *= Real(all);
  return total.convert_to<double>();
}

double harmonic(std::size_t n) {
  Real h = 0;
  for (std::size_t k = 1; k <= n; ++k) h += Real(1) / Real(k);
  return h.convert_to<double>();
}

double CoverageEstimate::coverage_probability(std::size_t V) const {
  if (trials == 0) return 0.0;
  std::size_t covered = 0;
  for (std::size_t k = 0; k < draws_histogram.size() && k <= V; ++k) covered += draws_histogram[k];
  return static_cast<double>(covered) / static_cast<double>(trials);
}

CoverageEstimate mc_coverage(std::size_t M, std::size_t L, std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw DomainError("mc_coverage: trials must be positive");
  if (L == 0 || L > M) throw DomainError("mc_coverage: need 1 <= L <= M");

  Rng rng(seed);
  // Partial Fisher-Yates on a persistent permutation yields a uniform
  // L-subset from any starting order, so the array is never reset.
  std::vector<std::size_t> perm(M);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::uint64_t> seen(M, 0);

  CoverageEstimate est;
  est.trials = trials;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 1; t <= trials; ++t) {
    std::size_t covered = 0, draws = 0;
    while (covered < M) {
      ++draws;
      for (std::size_t i = 0; i < L; ++i) {
        std::swap(perm[i], perm[i + rng.below(M - i)]);
        if (seen[perm[i]] != t) {
          seen[perm[i]] = t;
          ++covered;
        }
      }
    }
    if (draws >= est.draws_histogram.size()) est.draws_histogram.resize(draws + 1, 0);
    ++est.draws_histogram[draws];
    const auto d = static_cast<double>(draws);
    sum += d;
    sum_sq += d * d;
  }
  const auto n = static_cast<double>(trials);
  est.mean_draws = sum / n;
  const double var = trials > 1 ? std::max(0.0, (sum_sq - n * est.mean_draws * est.mean_draws) / (n - 1)) : 0.0;
  est.std_error = std::sqrt(var / n);
  return est;
}

MinLEstimate mc_min_L(std::size_t M, std::size_t V, std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw DomainError("mc_min_L: trials must be positive");
  if (M == 0 || V == 0) throw DomainError("mc_min_L: M and V must be positive");

  Rng rng(seed);
  std::vector<std::size_t> perm(M);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> earliest(M);

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::fill(earliest.begin(), earliest.end(), M);
    for (std::size_t v = 0; v < V; ++v) {
      rng.shuffle(perm);
      for (std::size_t pos = 0; pos < M; ++pos) earliest[perm[pos]] = std::min(earliest[perm[pos]], pos);
    }
    const auto threshold = static_cast<double>(*std::max_element(earliest.begin(), earliest.end()) + 1);
    sum += threshold;
    sum_sq += threshold * threshold;
  }
  const auto n = static_cast<double>(trials);
  MinLEstimate est;
  est.trials = trials;
  est.mean = sum / n;
  const double var = trials > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1)) : 0.0;
  est.std_error = std::sqrt(var / n);
  return est;
}

}  // namespace fedblock

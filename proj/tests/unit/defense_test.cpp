#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "fedblock/defense.hpp"
#include "fedblock/errors.hpp"
#include "fedblock/planner.hpp"
#include "fedblock/rng.hpp"

namespace fedblock {
namespace {

constexpr double kEta = 0.1;

Matrix matrix(std::size_t r, std::size_t c, std::vector<double> v) {
  Matrix m(r, c);
  m.values = std::move(v);
  return m;
}

// Adds a client whose U is reconstructed from `global_U` as a verifier would.
void add_entry(VerificationTask& task, std::uint32_t id, Matrix dU, std::vector<double> db, std::size_t size,
               const Matrix& global_U, double trust = 1.0) {
  Matrix U = global_U;
  for (std::size_t k = 0; k < U.values.size(); ++k) U.values[k] -= kEta * dU.values[k];
  task.entries.push_back(TaskEntry{ClientId{id}, std::move(dU), std::move(db), size, std::move(U)});
  task.trust[ClientId{id}] = trust;
}

VerificationTask random_task(std::size_t n, std::uint64_t seed, std::size_t classes = 3, std::size_t hidden = 4) {
  Rng rng(seed);
  Matrix Ug(classes, hidden);
  for (double& v : Ug.values) v = rng.normal();
  VerificationTask task;
  task.verifier = ClientId{999};
  const double levels[] = {0.0, 0.5, 1.0, 0.75, 0.25};
  for (std::uint32_t i = 0; i < n; ++i) {
    Matrix dU(classes, hidden);
    for (double& v : dU.values) v = rng.normal();
    std::vector<double> db(classes);
    for (double& v : db) v = rng.normal();
    add_entry(task, 10 + 3 * i, std::move(dU), std::move(db), 20 + rng.below(200), Ug, levels[rng.below(5)]);
  }
  return task;
}

// Straight-line filter 1: size-weighted means, cosine of the deviation
// U_* - U_i with the mean gradient, min-max scaling, strict lower median.
std::set<ClientId> filter1_oracle(const VerificationTask& t) {
  const std::size_t n = t.entries.size(), dim = t.entries[0].U.values.size();
  std::vector<double> us(dim, 0.0), gs(dim, 0.0);
  double w = 0.0;
  for (const auto& e : t.entries) {
    w += static_cast<double>(e.data_size);
    for (std::size_t k = 0; k < dim; ++k) {
      us[k] += static_cast<double>(e.data_size) * e.U.values[k];
      gs[k] += static_cast<double>(e.data_size) * e.dU.values[k];
    }
  }
  double gn = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    us[k] /= w;
    gs[k] /= w;
    gn += gs[k] * gs[k];
  }
  gn = std::sqrt(gn);
  if (gn == 0.0) return {};
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0, dn = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = us[k] - t.entries[i].U.values[k];
      dot += d * gs[k];
      dn += d * d;
    }
    a[i] = dn == 0.0 ? 0.0 : dot / (std::sqrt(dn) * gn);
  }
  const double lo = *std::min_element(a.begin(), a.end());
  const double hi = *std::max_element(a.begin(), a.end());
  for (double& v : a) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[(n - 1) / 2];
  std::set<ClientId> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] > median) out.insert(t.entries[i].client);
  }
  return out;
}

double sse(const std::vector<std::vector<double>>& pts, unsigned mask) {
  double total = 0.0;
  for (unsigned side = 0; side < 2; ++side) {
    std::vector<double> c(pts[0].size(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (((mask >> i) & 1U) != side) continue;
      for (std::size_t k = 0; k < c.size(); ++k) c[k] += pts[i][k];
      ++count;
    }
    if (count == 0) continue;
    for (double& v : c) v /= static_cast<double>(count);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (((mask >> i) & 1U) != side) continue;
      for (std::size_t k = 0; k < c.size(); ++k) total += (pts[i][k] - c[k]) * (pts[i][k] - c[k]);
    }
  }
  return total;
}

// Exhaustive minimum-SSE 2-partition. Bit i of the result is set when point
// i is on the other side from point 0.
unsigned best_partition(const std::vector<std::vector<double>>& pts) {
  const std::size_t n = pts.size();
  unsigned best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (unsigned mask = 2; mask < (1U << n); mask += 2) {
    const double s = sse(pts, mask);
    if (s < best_sse) {
      best_sse = s;
      best = mask;
    }
  }
  return best;
}

unsigned labels_to_mask(const std::vector<int>& labels) {
  unsigned mask = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != labels[0]) mask |= 1U << i;
  }
  return mask;
}

std::vector<std::vector<double>> two_groups(std::size_t n, std::size_t dim, std::uint64_t seed,
                                            std::vector<int>& truth) {
  Rng rng(seed);
  std::vector<double> centre_b(dim);
  for (double& v : centre_b) v = rng.normal();
  double norm = 0.0;
  for (double v : centre_b) norm += v * v;
  // Group centres 10 apart, within-group spread about 1.
  for (double& v : centre_b) v *= 10.0 / std::sqrt(norm);
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  truth.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = rng.below(2) || i == 1 ? 1 : 0;
    if (i == 0) truth[i] = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      pts[i][k] = (truth[i] ? centre_b[k] : 0.0) + 0.5 * rng.normal() / std::sqrt(static_cast<double>(dim));
    }
  }
  return pts;
}

TEST(GradientFilter, SymmetricPairIsDegenerate) {
  VerificationTask t;
  t.entries.push_back(TaskEntry{ClientId{1}, matrix(1, 2, {1, 0}), {0}, 10, matrix(1, 2, {1, 0})});
  t.entries.push_back(TaskEntry{ClientId{2}, matrix(1, 2, {0, 1}), {0}, 10, matrix(1, 2, {0, 1})});
  const auto scores = gradient_similarity_scores(t);
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0].second, 0.0);
  EXPECT_EQ(scores[1].second, 0.0);
  EXPECT_TRUE(filter_gradient_similarity(t).empty());
}

TEST(GradientFilter, AllEqualScoresGiveEmptySet) {
  VerificationTask t;
  const Matrix Ug = matrix(2, 2, {1, 2, 3, 4});
  for (std::uint32_t i = 0; i < 4; ++i) add_entry(t, i, matrix(2, 2, {1, 1, 1, 1}), {0, 0}, 10, Ug);
  EXPECT_TRUE(filter_gradient_similarity(t).empty());
}

TEST(GradientFilter, ZeroMeanGradientGivesEmptySet) {
  VerificationTask t;
  const Matrix Ug = matrix(1, 2, {0.5, 0.5});
  add_entry(t, 0, matrix(1, 2, {1, -2}), {0}, 10, Ug);
  add_entry(t, 1, matrix(1, 2, {-1, 2}), {0}, 10, Ug);
  EXPECT_TRUE(gradient_similarity_scores(t).empty());
  EXPECT_TRUE(filter_gradient_similarity(t).empty());
}

// Two clients push along the consensus direction, five against it.
VerificationTask seven_client_fixture() {
  VerificationTask t;
  const Matrix Ug = matrix(2, 3, {0.3, -0.1, 0.2, 0.0, 0.4, -0.3});
  const std::vector<double> dir = {1.0, 0.5, -0.25, 0.75, -1.0, 0.5};
  auto scaled = [&](double s, double jitter) {
    Matrix m(2, 3);
    for (std::size_t k = 0; k < 6; ++k) m.values[k] = s * dir[k] + jitter * ((k % 3) - 1.0);
    return m;
  };
  // Benign updates are identical so their scores tie at the lower median.
  for (std::uint32_t id : {0u, 2u, 3u, 5u, 6u}) add_entry(t, id, scaled(-1.0, 0.0), {0.1, -0.1}, 100, Ug);
  add_entry(t, 1, scaled(6.0, 0.02), {0.5, -0.5}, 100, Ug, 0.75);
  add_entry(t, 4, scaled(6.2, -0.02), {0.5, -0.5}, 100, Ug);
  return t;
}

TEST(GradientFilter, SevenClientFixtureFlagsAligned) {
  const auto t = seven_client_fixture();
  const std::set<ClientId> aligned = {ClientId{1}, ClientId{4}};
  EXPECT_EQ(filter1_oracle(t), aligned);
  EXPECT_EQ(filter_gradient_similarity(t), aligned);
}

TEST(GradientFilter, MatchesOracleOnRandomTasks) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto t = random_task(2 + seed % 11, seed);
    EXPECT_EQ(filter_gradient_similarity(t), filter1_oracle(t)) << "seed " << seed;
  }
}

TEST(GradientFilter, StrictMedianBound) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    const std::size_t n = 2 + seed % 15;
    EXPECT_LE(filter_gradient_similarity(random_task(n, seed)).size(), n / 2) << "seed " << seed;
  }
}

TEST(GradientFilter, ScaleInvariant) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto t = random_task(3 + seed % 9, seed);
    // Scaling every dU by c scales U_* - U_i and the mean gradient by c.
    for (double c : {0.01, 3.7, 250.0}) {
      VerificationTask s;
      for (const auto& e : t.entries) {
        Matrix Ug = e.U;
        for (std::size_t k = 0; k < Ug.values.size(); ++k) Ug.values[k] += kEta * e.dU.values[k];
        Matrix dU = e.dU;
        for (double& v : dU.values) v *= c;
        add_entry(s, e.client.value, dU, e.db, e.data_size, Ug);
      }
      EXPECT_EQ(filter_gradient_similarity(s), filter_gradient_similarity(t)) << "seed " << seed << " c " << c;
    }
  }
}

TEST(TwoMeans, MatchesExhaustiveOracleOnSeparatedGroups) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const std::size_t n = 3 + seed % 10;  // up to 12
    std::vector<int> truth;
    const auto pts = two_groups(n, 4, seed, truth);
    const unsigned oracle = best_partition(pts);
    EXPECT_EQ(labels_to_mask(two_means(pts)), oracle) << "seed " << seed;
    EXPECT_EQ(labels_to_mask(truth), oracle) << "seed " << seed;
  }
}

TEST(TwoMeans, Deterministic) {
  Rng rng(3);
  std::vector<std::vector<double>> pts(12, std::vector<double>(5));
  for (auto& p : pts) {
    for (double& v : p) v = rng.normal();
  }
  EXPECT_EQ(two_means(pts), two_means(pts));
}

TEST(ByClassFilter, DistinctPairTieGoesToLowerId) {
  VerificationTask t;
  const Matrix Ug(2, 2);
  add_entry(t, 4, matrix(2, 2, {1, 0, 0, 0}), {0, 0}, 10, Ug);
  add_entry(t, 2, matrix(2, 2, {0, 0, 3, 0}), {0, 1}, 10, Ug);
  EXPECT_EQ(filter_byclass_kmeans(t), (std::set<ClientId>{ClientId{2}}));
}

TEST(ByClassFilter, IdenticalByClassGradientsGiveEmptySet) {
  VerificationTask t;
  const Matrix Ug(2, 2);
  // Different dU, same row sums and bias.
  add_entry(t, 0, matrix(2, 2, {1, 2, 3, 4}), {5, 6}, 10, Ug, 0.0);
  add_entry(t, 1, matrix(2, 2, {2, 1, 4, 3}), {5, 6}, 10, Ug);
  add_entry(t, 2, matrix(2, 2, {0, 3, 7, 0}), {5, 6}, 10, Ug);
  EXPECT_TRUE(filter_byclass_kmeans(t).empty());
}

TEST(ByClassFilter, SeparatedGroupsMatchOracle) {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const std::size_t n = 3 + seed % 10;
    std::vector<int> truth;
    // by-class gradients for l = 2 are 4-vectors: dU is 2x1, so row sums are dU itself.
    const auto mu = two_groups(n, 4, seed + 1000, truth);
    VerificationTask t;
    const Matrix Ug(2, 1);
    Rng rng(seed);
    for (std::uint32_t i = 0; i < n; ++i) {
      add_entry(t, i, matrix(2, 1, {mu[i][0], mu[i][1]}), {mu[i][2], mu[i][3]}, 10, Ug,
                rng.below(2) ? 1.0 : 0.5 + 0.1 * static_cast<double>(rng.below(4)));
    }
    // Oracle: distance features, exhaustive 2-partition, cluster of the least trusted (lowest id on ties).
    std::vector<std::vector<double>> feats(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += (mu[i][k] - mu[j][k]) * (mu[i][k] - mu[j][k]);
        feats[i][j] = std::sqrt(s);
      }
    }
    const unsigned mask = best_partition(feats);
    std::size_t lowest = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (t.trust[ClientId{static_cast<std::uint32_t>(i)}] < t.trust[ClientId{static_cast<std::uint32_t>(lowest)}]) {
        lowest = i;
      }
    }
    std::set<ClientId> expected;
    for (std::size_t i = 0; i < n; ++i) {
      if (((mask >> i) & 1U) == ((mask >> lowest) & 1U)) expected.insert(ClientId{static_cast<std::uint32_t>(i)});
    }
    EXPECT_EQ(filter_byclass_kmeans(t), expected) << "seed " << seed;
  }
}

TEST(Combine, CaseSplit) {
  const std::vector<ClientId> c = {ClientId{1}, ClientId{2}, ClientId{3}, ClientId{4}};
  const auto s = combine_scores({ClientId{1}, ClientId{2}}, {ClientId{1}, ClientId{3}}, c);
  EXPECT_EQ(s.at(ClientId{1}), 0.0);
  EXPECT_EQ(s.at(ClientId{2}), 0.5);
  EXPECT_EQ(s.at(ClientId{3}), 0.5);
  EXPECT_EQ(s.at(ClientId{4}), 1.0);
}

TEST(Verify, IdenticalBenignPairScoresAtLeastHalf) {
  VerificationTask t;
  const Matrix Ug = matrix(2, 2, {0.1, 0.2, 0.3, 0.4});
  add_entry(t, 0, matrix(2, 2, {1, -1, 0.5, 2}), {0.2, -0.2}, 50, Ug);
  add_entry(t, 1, matrix(2, 2, {1, -1, 0.5, 2}), {0.2, -0.2}, 50, Ug);
  const auto r = verify(t);
  ASSERT_EQ(r.scores.size(), 2u);
  for (const auto& [_, s] : r.scores) EXPECT_GE(s, 0.5);
}

TEST(Verify, ColludingPairScoresZero) {
  const auto t = seven_client_fixture();
  const std::set<ClientId> colluders = {ClientId{1}, ClientId{4}};
  // Both filter oracles agree on the pair before the composite is checked.
  ASSERT_EQ(filter1_oracle(t), colluders);
  ASSERT_EQ(filter_byclass_kmeans(t), colluders);
  const auto r = verify(t);
  for (const auto& [id, s] : r.scores) EXPECT_EQ(s, colluders.count(id) ? 0.0 : 1.0) << id;
}

TEST(Verify, DegenerateTaskScoresAllOne) {
  VerificationTask t;
  const Matrix Ug(1, 2);
  // Opposite gradients cancel; equal row sums and bias make mu identical.
  add_entry(t, 0, matrix(1, 2, {1, -1}), {0}, 10, Ug);
  add_entry(t, 1, matrix(1, 2, {-1, 1}), {0}, 10, Ug);
  for (const auto& [_, s] : verify(t).scores) EXPECT_EQ(s, 1.0);
}

TEST(Verify, ScoreDomainAndCoverage) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto t = random_task(2 + seed % 12, seed);
    const auto r = verify(t);
    EXPECT_EQ(r.scores.size(), t.entries.size());
    for (const auto& [_, s] : r.scores) EXPECT_TRUE(s == 0.0 || s == 0.5 || s == 1.0);
  }
}

TEST(Verify, PermutationEquivariant) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto t = random_task(3 + seed % 10, seed);
    auto shuffled = t;
    Rng rng(seed);
    rng.shuffle(shuffled.entries);
    EXPECT_EQ(verify(shuffled), verify(t)) << "seed " << seed;
  }
}

TEST(Verify, RejectsMalformedTasks) {
  auto t = random_task(3, 1);
  t.entries.resize(1);
  EXPECT_THROW(verify(t), DomainError);
  auto dup = random_task(3, 1);
  dup.entries[1].client = dup.entries[0].client;
  EXPECT_THROW(verify(dup), DomainError);
}

TEST(MakeTask, ReconstructsUltimateWeights) {
  const auto global = init_mlp(std::vector<std::size_t>{4, 5, 3}, 1);
  std::vector<Submission> subs;
  for (std::uint32_t i = 0; i < 3; ++i) {
    subs.push_back(make_submission(ClientId{i}, init_mlp(std::vector<std::size_t>{4, 5, 3}, 10 + i), global, 0.05,
                                   40, 2));
  }
  const auto task = make_task(ClientId{9}, 2, subs, global, 0.05, {{ClientId{1}, 0.5}});
  ASSERT_EQ(task.entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& U = subs[i].model.ultimate().weight;
    for (std::size_t k = 0; k < U.values.size(); ++k) EXPECT_NEAR(task.entries[i].U.values[k], U.values[k], 1e-12);
  }
  EXPECT_EQ(task.trust.at(ClientId{0}), 1.0);
  EXPECT_EQ(task.trust.at(ClientId{1}), 0.5);
}

ScoreReport sample_report() {
  return ScoreReport{ClientId{7}, 3, {{ClientId{0}, 0.0}, {ClientId{1}, 0.5}, {ClientId{2}, 1.0}, {ClientId{5}, 1.0}}};
}

TEST(Corrupt, ReverseIsInvolution) {
  const auto r = sample_report();
  const auto once = corrupt_report(r, CorruptionMode::reverse, 1);
  EXPECT_EQ(once.scores.at(ClientId{0}), 1.0);
  EXPECT_EQ(once.scores.at(ClientId{1}), 0.5);
  EXPECT_EQ(once.scores.at(ClientId{2}), 0.0);
  EXPECT_EQ(corrupt_report(once, CorruptionMode::reverse, 2), r);
}

TEST(Corrupt, ReverseOfAllOnesIsAllZeros) {
  ScoreReport r{ClientId{1}, 0, {{ClientId{0}, 1.0}, {ClientId{1}, 1.0}}};
  for (const auto& [_, s] : corrupt_report(r, CorruptionMode::reverse, 0).scores) EXPECT_EQ(s, 0.0);
}

TEST(Corrupt, RandomIsSeededAndInDomain) {
  ScoreReport r{ClientId{1}, 0, {}};
  for (std::uint32_t i = 0; i < 300; ++i) r.scores[ClientId{i}] = 1.0;
  const auto a = corrupt_report(r, CorruptionMode::random, 5);
  EXPECT_EQ(a, corrupt_report(r, CorruptionMode::random, 5));
  EXPECT_NE(a, corrupt_report(r, CorruptionMode::random, 6));
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& [_, s] : a.scores) {
    ASSERT_TRUE(s == 0.0 || s == 0.5 || s == 1.0);
    ++counts[static_cast<std::size_t>(s * 2)];
  }
  for (auto c : counts) EXPECT_GT(c, 60u);
  EXPECT_EQ(a.verifier, r.verifier);
}

std::vector<ClientId> range_ids(std::uint32_t from, std::uint32_t n) {
  std::vector<ClientId> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(ClientId{from + i});
  return out;
}

TEST(Assign, FullSubsetIsWholeSet) {
  const auto M = range_ids(0, 8);
  for (const auto& [_, subset] : assign_clients_to_verifiers(M, range_ids(100, 4), 8, 1)) EXPECT_EQ(subset, M);
}

TEST(Assign, DistinctSubsetsOfRequestedSize) {
  const auto M = range_ids(0, 30);
  const auto a = assign_clients_to_verifiers(M, range_ids(100, 15), 7, 3);
  ASSERT_EQ(a.size(), 15u);
  for (const auto& [_, subset] : a) {
    EXPECT_EQ(subset.size(), 7u);
    EXPECT_EQ(std::set<ClientId>(subset.begin(), subset.end()).size(), 7u);
    for (auto id : subset) EXPECT_LT(id.value, 30u);
  }
  EXPECT_EQ(a, assign_clients_to_verifiers(M, range_ids(100, 15), 7, 3));
  EXPECT_THROW(assign_clients_to_verifiers(M, range_ids(100, 15), 31, 3), DomainError);
}

TEST(Assign, CoverageMatchesMonteCarlo) {
  const std::size_t M = 10, L = 4, V = 6;
  const auto set = range_ids(0, M);
  const auto verifiers = range_ids(100, V);
  const std::size_t runs = 20000;
  std::size_t covered = 0;
  for (std::size_t r = 0; r < runs; ++r) {
    std::set<ClientId> seen;
    for (const auto& [_, subset] : assign_clients_to_verifiers(set, verifiers, L, 7000 + r)) {
      seen.insert(subset.begin(), subset.end());
    }
    covered += seen.size() == M;
  }
  const double p_assign = static_cast<double>(covered) / runs;
  const auto mc = mc_coverage(M, L, 200000, 11);
  const double p_mc = mc.coverage_probability(V);
  const double sigma = std::sqrt(p_mc * (1 - p_mc) / runs + p_mc * (1 - p_mc) / 200000.0);
  EXPECT_LE(std::abs(p_assign - p_mc), 2 * sigma) << p_assign << " vs " << p_mc;
}

}  // namespace
}  // namespace fedblock

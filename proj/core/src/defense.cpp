#include "fedblock/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedblock/errors.hpp"
#include "fedblock/rng.hpp"

namespace fedblock {

namespace {

std::vector<const TaskEntry*> sorted_entries(const VerificationTask& task) {
  if (task.entries.size() < 2) throw DomainError("verification needs at least two clients");
  std::vector<const TaskEntry*> out;
  out.reserve(task.entries.size());
  for (const auto& e : task.entries) out.push_back(&e);
  std::sort(out.begin(), out.end(), [](const TaskEntry* a, const TaskEntry* b) { return a->client < b->client; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->client == out[i - 1]->client) throw DomainError("verification task lists a client twice");
  }
  const auto& first = *out.front();
  for (const auto* e : out) {
    if (e->dU.rows != first.dU.rows || e->dU.cols != first.dU.cols || e->U.rows != first.dU.rows ||
        e->U.cols != first.dU.cols || e->db.size() != first.dU.rows) {
      throw ShapeError("verification task has inconsistent gradient shapes");
    }
  }
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

VerificationTask make_task(ClientId verifier, int round, std::span<const Submission> submissions,
                           const ModelParams& global, double learning_rate,
                           const std::map<ClientId, double>& trust) {
  VerificationTask task{verifier, round, {}, {}};
  const auto& U = global.ultimate().weight;
  for (const auto& sub : submissions) {
    TaskEntry e{sub.client, sub.ug.dU, sub.ug.db, sub.data_size, U};
    if (e.dU.rows != U.rows || e.dU.cols != U.cols) throw ShapeError("make_task: gradient shape mismatch");
    for (std::size_t k = 0; k < e.U.values.size(); ++k) e.U.values[k] -= learning_rate * e.dU.values[k];
    auto it = trust.find(sub.client);
    task.trust[sub.client] = it == trust.end() ? 1.0 : it->second;
    task.entries.push_back(std::move(e));
  }
  return task;
}

std::vector<std::pair<ClientId, double>> gradient_similarity_scores(const VerificationTask& task) {
  const auto entries = sorted_entries(task);
  const std::size_t dim = entries.front()->U.values.size();

  double total = 0.0;
  std::vector<double> u_mean(dim, 0.0), g_mean(dim, 0.0);
  for (const auto* e : entries) {
    const auto w = static_cast<double>(e->data_size);
    total += w;
    for (std::size_t k = 0; k < dim; ++k) {
      u_mean[k] += w * e->U.values[k];
      g_mean[k] += w * e->dU.values[k];
    }
  }
  if (!(total > 0.0)) throw DomainError("gradient filter: total data size is zero");
  double g_norm = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    u_mean[k] /= total;
    g_mean[k] /= total;
    g_norm += g_mean[k] * g_mean[k];
  }
  g_norm = std::sqrt(g_norm);
  if (g_norm == 0.0) return {};

  std::vector<std::pair<ClientId, double>> scores;
  for (const auto* e : entries) {
    double dot = 0.0, d_norm = 0.0;
    // U_i - U_* = -eta (dU_i - dU_*), so the deviation is taken as U_* - U_i:
    // clients pushing further along the mean gradient score higher.
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = u_mean[k] - e->U.values[k];
      dot += d * g_mean[k];
      d_norm += d * d;
    }
    d_norm = std::sqrt(d_norm);
    scores.emplace_back(e->client, d_norm == 0.0 ? 0.0 : dot / (d_norm * g_norm));
  }

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [_, a] : scores) {
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  for (auto& [_, a] : scores) a = hi > lo ? (a - lo) / (hi - lo) : 0.0;
  return scores;
}

std::set<ClientId> filter_gradient_similarity(const VerificationTask& task) {
  const auto scores = gradient_similarity_scores(task);
  std::set<ClientId> suspects;
  if (scores.empty()) return suspects;
  std::vector<double> values;
  for (const auto& [_, a] : scores) values.push_back(a);
  std::sort(values.begin(), values.end());
  const double median = values[(values.size() - 1) / 2];
  for (const auto& [id, a] : scores) {
    if (a > median) suspects.insert(id);
  }
  return suspects;
}

std::vector<int> two_means(const std::vector<std::vector<double>>& points) {
  const std::size_t n = points.size();
  std::vector<int> labels(n, 0);
  if (n < 2) return labels;

  std::size_t seed_a = 0, seed_b = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = squared_distance(points[i], points[j]);
      if (d > best) {
        best = d;
        seed_a = i;
        seed_b = j;
      }
    }
  }
  std::vector<std::vector<double>> centroid = {points[seed_a], points[seed_b]};
  const std::size_t dim = points.front().size();

  for (int iter = 0; iter < 100; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int label = squared_distance(points[i], centroid[1]) < squared_distance(points[i], centroid[0]) ? 1 : 0;
      if (label != labels[i]) {
        labels[i] = label;
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < 2; ++c) {
      std::vector<double> sum(dim, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != c) continue;
        for (std::size_t k = 0; k < dim; ++k) sum[k] += points[i][k];
        ++count;
      }
      if (count == 0) continue;
      for (double& v : sum) v /= static_cast<double>(count);
      centroid[static_cast<std::size_t>(c)] = std::move(sum);
    }
  }
  return labels;
}

std::set<ClientId> filter_byclass_kmeans(const VerificationTask& task) {
  const auto entries = sorted_entries(task);
  const std::size_t n = entries.size();

  std::vector<std::vector<double>> mu;
  mu.reserve(n);
  for (const auto* e : entries) {
    UltimateGradient g{e->dU, e->db, e->client, task.round};
    mu.push_back(by_class_gradient(g));
  }
  std::vector<std::vector<double>> features(n, std::vector<double>(n, 0.0));
  bool distinct = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      features[i][j] = std::sqrt(squared_distance(mu[i], mu[j]));
      if (features[i][j] > 0.0) distinct = true;
    }
  }
  std::set<ClientId> suspects;
  if (!distinct) return suspects;

  const auto labels = two_means(features);

  std::size_t lowest = 0;
  auto trust_of = [&](std::size_t i) {
    auto it = task.trust.find(entries[i]->client);
    return it == task.trust.end() ? 1.0 : it->second;
  };
  for (std::size_t i = 1; i < n; ++i) {
    if (trust_of(i) < trust_of(lowest)) lowest = i;  // entries are id-ordered, so ties keep the lowest id
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == labels[lowest]) suspects.insert(entries[i]->client);
  }
  return suspects;
}

std::map<ClientId, double> combine_scores(const std::set<ClientId>& s1, const std::set<ClientId>& s2,
                                          std::span<const ClientId> clients) {
  std::map<ClientId, double> scores;
  for (ClientId id : clients) {
    const bool in1 = s1.count(id) != 0;
    const bool in2 = s2.count(id) != 0;
    scores[id] = in1 && in2 ? 0.0 : (!in1 && !in2 ? 1.0 : 0.5);
  }
  return scores;
}

ScoreReport verify(const VerificationTask& task) {
  std::vector<ClientId> clients;
  for (const auto& e : task.entries) clients.push_back(e.client);
  const auto s1 = filter_gradient_similarity(task);
  const auto s2 = filter_byclass_kmeans(task);
  return ScoreReport{task.verifier, task.round, combine_scores(s1, s2, clients)};
}

std::string_view to_string(CorruptionMode m) { return m == CorruptionMode::random ? "random" : "reverse"; }

CorruptionMode parse_corruption_mode(std::string_view name) {
  if (name == "random") return CorruptionMode::random;
  if (name == "reverse") return CorruptionMode::reverse;
  throw ConfigError("unknown corruption mode '" + std::string(name) + "'");
}

ScoreReport corrupt_report(const ScoreReport& report, CorruptionMode mode, std::uint64_t seed) {
  ScoreReport out = report;
  if (mode == CorruptionMode::reverse) {
    for (auto& [_, s] : out.scores) s = 1.0 - s;
    return out;
  }
  static constexpr double kLevels[] = {0.0, 0.5, 1.0};
  Rng rng(seed);
  for (auto& [_, s] : out.scores) s = kLevels[rng.below(3)];
  return out;
}

std::map<ClientId, std::vector<ClientId>> assign_clients_to_verifiers(std::span<const ClientId> verification_set,
                                                                      std::span<const ClientId> verifiers,
                                                                      std::size_t L, std::uint64_t seed) {
  if (L > verification_set.size()) {
    throw DomainError("assign_clients_to_verifiers: L=" + std::to_string(L) + " exceeds M=" +
                      std::to_string(verification_set.size()));
  }
  std::vector<ClientId> ordered(verifiers.begin(), verifiers.end());
  std::sort(ordered.begin(), ordered.end());
  Rng rng(seed);
  std::map<ClientId, std::vector<ClientId>> out;
  for (ClientId v : ordered) {
    std::vector<ClientId> subset;
    for (std::size_t i : rng.sample_indices(verification_set.size(), L)) subset.push_back(verification_set[i]);
    std::sort(subset.begin(), subset.end());
    out[v] = std::move(subset);
  }
  return out;
}

}  // namespace fedblock

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "fedblock/clients.hpp"
#include "fedblock/nn.hpp"
#include "fedblock/types.hpp"

namespace fedblock {

struct TaskEntry {
  ClientId client{};
  Matrix dU;
  std::vector<double> db;
  std::size_t data_size = 0;
  Matrix U;  // reconstructed ultimate weight
};

/// What one verifier downloads for a round: ultimate gradients of the
/// clients it must score, plus the current trust of those clients.
struct VerificationTask {
  ClientId verifier{};
  int round = 0;
  std::vector<TaskEntry> entries;
  std::map<ClientId, double> trust;
};

/// Builds a task from submissions, reconstructing U_i = U_global - eta * dU_i
/// from the public global model.
VerificationTask make_task(ClientId verifier, int round, std::span<const Submission> submissions,
                           const ModelParams& global, double learning_rate,
                           const std::map<ClientId, double>& trust);

/// Min-max scaled alignment scores a_i, in client-id order: the cosine
/// between U_* - U_i and the size-weighted mean gradient, so a client that
/// moved further along the consensus gradient than the mean scores higher.
/// Empty when the mean gradient is zero; all zeros when every raw score is
/// equal.
std::vector<std::pair<ClientId, double>> gradient_similarity_scores(const VerificationTask& task);

/// Clients whose scaled a_i is strictly above the (lower) median.
std::set<ClientId> filter_gradient_similarity(const VerificationTask& task);

/// Lloyd's 2-means with farthest-pair seeding (ties: lowest indices), at most
/// 100 iterations. Returns a 0/1 label per point. A cluster that empties
/// keeps its previous centroid.
std::vector<int> two_means(const std::vector<std::vector<double>>& points);

/// Members of the by-class-gradient cluster that contains the least trusted
/// client (ties: lowest id). Empty when every by-class gradient coincides.
std::set<ClientId> filter_byclass_kmeans(const VerificationTask& task);

/// 0 for clients in both sets, 1 for clients in neither, 1/2 otherwise.
std::map<ClientId, double> combine_scores(const std::set<ClientId>& s1, const std::set<ClientId>& s2,
                                          std::span<const ClientId> clients);

ScoreReport verify(const VerificationTask& task);

enum class CorruptionMode { random, reverse };

std::string_view to_string(CorruptionMode m);
CorruptionMode parse_corruption_mode(std::string_view name);

/// random: each score uniform over {0, 1/2, 1}; reverse: 0 <-> 1.
ScoreReport corrupt_report(const ScoreReport& report, CorruptionMode mode, std::uint64_t seed);

/// Each verifier (in id order) draws its own uniform L-subset of the set.
std::map<ClientId, std::vector<ClientId>> assign_clients_to_verifiers(std::span<const ClientId> verification_set,
                                                                      std::span<const ClientId> verifiers,
                                                                      std::size_t L, std::uint64_t seed);

}  // namespace fedblock

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedblock/types.hpp"

namespace fedblock {

/// Balanced Gaussian class clusters with unit variance. Class means sit on a
/// scaled simplex (`separation` * e_c when features >= classes), which keeps
/// the Bayes accuracy above 95% at the default separation.
Dataset gen_dataset(std::size_t n, std::size_t classes, std::size_t features, std::uint64_t seed,
                    double separation = 3.5);

struct PartitionSpec {
  std::size_t n_clients = 1;
  double non_iid_degree = 0.0;  // phi in [0, 1]
  std::size_t per_client_size = 1;
  std::uint64_t seed = 0;
};

/// Client i draws round(phi * size) samples from its dominant class
/// (i mod classes) and the rest from a uniformly chosen class per draw.
/// Samples are drawn without replacement from `data`.
std::vector<Dataset> partition_non_iid(std::span<const Sample> data, std::size_t classes,
                                       const PartitionSpec& spec);

struct PoisonSpec {
  int target_class = 0;
  std::vector<std::size_t> trigger_coords;
  double trigger_value = 1.0;
  double pdr = 0.0;
  /// Prefer samples in the tail of their class distribution.
  bool edge_case = false;
};

struct PoisonResult {
  Dataset data;
  std::vector<bool> flags;
};

void validate(const PoisonSpec& spec, std::size_t features);

/// Stamps the trigger on ceil(pdr * n) samples and relabels them to the target.
PoisonResult poison(std::span<const Sample> data, const PoisonSpec& spec, std::uint64_t seed);

/// Trigger applied to every sample whose original label is not the target.
Dataset triggered_testset(std::span<const Sample> clean, const PoisonSpec& spec);

/// Rows of `features` comma-separated reals followed by an integer label.
/// A non-numeric first line is treated as a header.
Dataset load_csv(const std::filesystem::path& path, std::size_t features, std::size_t classes);

}  // namespace fedblock

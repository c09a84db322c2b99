#include "fedblock/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>

#include "fedblock/errors.hpp"
#include "fedblock/rng.hpp"

namespace fedblock {

namespace {

std::vector<std::vector<double>> class_means(std::size_t classes, std::size_t features,
                                             double separation) {
  std::vector<std::vector<double>> means(classes, std::vector<double>(features, 0.0));
  if (features >= classes) {
    for (std::size_t c = 0; c < classes; ++c) means[c][c] = separation;
    return means;
  }
  // Not enough room for a simplex: keep neighbouring means as far apart as
  // simplex vertices would be (separation * sqrt 2).
  const double gap = separation * std::numbers::sqrt2;
  if (features == 1) {
    for (std::size_t c = 0; c < classes; ++c) means[c][0] = gap * static_cast<double>(c);
    return means;
  }
  const double radius = gap / (2.0 * std::sin(std::numbers::pi / static_cast<double>(classes)));
  for (std::size_t c = 0; c < classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
    means[c][0] = radius * std::cos(angle);
    means[c][1] = radius * std::sin(angle);
  }
  return means;
}

void stamp(Sample& s, const PoisonSpec& spec) {
  for (std::size_t coord : spec.trigger_coords) s.x[coord] = spec.trigger_value;
  s.label = spec.target_class;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

// Poison candidates ordered tail-first: samples more than two standard
// deviations (of the within-class distance distribution) beyond the mean
// distance to their class centre come first, then the rest by distance.
std::vector<std::size_t> edge_case_order(std::span<const Sample> data, Rng& rng) {
  const std::size_t features = data.front().x.size();
  int max_label = 0;
  for (const auto& s : data) max_label = std::max(max_label, s.label);
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;

  std::vector<std::vector<double>> centre(classes, std::vector<double>(features, 0.0));
  std::vector<std::size_t> count(classes, 0);
  for (const auto& s : data) {
    auto& c = centre[static_cast<std::size_t>(s.label)];
    for (std::size_t k = 0; k < features; ++k) c[k] += s.x[k];
    ++count[static_cast<std::size_t>(s.label)];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0) continue;
    for (double& v : centre[c]) v /= static_cast<double>(count[c]);
  }

  std::vector<double> dist(data.size());
  std::vector<double> sum(classes, 0.0), sum_sq(classes, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<std::size_t>(data[i].label);
    dist[i] = distance(data[i].x, centre[c]);
    sum[c] += dist[i];
    sum_sq[c] += dist[i] * dist[i];
  }

  std::vector<std::size_t> tail, rest;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<std::size_t>(data[i].label);
    const double n = static_cast<double>(count[c]);
    const double mean = sum[c] / n;
    const double sd = std::sqrt(std::max(0.0, sum_sq[c] / n - mean * mean));
    (dist[i] > mean + 2.0 * sd ? tail : rest).push_back(i);
  }
  rng.shuffle(tail);
  std::stable_sort(rest.begin(), rest.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  tail.insert(tail.end(), rest.begin(), rest.end());
  return tail;
}

}  // namespace

Dataset gen_dataset(std::size_t n, std::size_t classes, std::size_t features, std::uint64_t seed,
                    double separation) {
  if (n == 0 || classes == 0 || features == 0) {
    throw DomainError("gen_dataset: n, classes and features must be positive");
  }
  const auto means = class_means(classes, features, separation);
  Rng rng(seed);
  Dataset data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    data[i].label = static_cast<int>(c);
    data[i].x.resize(features);
    for (std::size_t k = 0; k < features; ++k) data[i].x[k] = means[c][k] + rng.normal();
  }
  rng.shuffle(data);
  return data;
}

std::vector<Dataset> partition_non_iid(std::span<const Sample> data, std::size_t classes,
                                       const PartitionSpec& spec) {
  if (spec.n_clients == 0 || spec.per_client_size == 0 || classes == 0) {
    throw DomainError("partition_non_iid: clients, size and classes must be positive");
  }
  if (!(spec.non_iid_degree >= 0.0 && spec.non_iid_degree <= 1.0)) {
    throw DomainError("partition_non_iid: non-IID degree must lie in [0, 1]");
  }
  if (data.size() < spec.n_clients * spec.per_client_size) {
    throw DomainError("partition_non_iid: insufficient data for the requested partition");
  }

  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> pools(classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = data[i].label;
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DomainError("partition_non_iid: label out of range");
    }
    pools[static_cast<std::size_t>(y)].push_back(i);
  }
  for (auto& pool : pools) rng.shuffle(pool);

  auto take = [&](std::size_t c) {
    if (pools[c].empty()) throw DomainError("partition_non_iid: insufficient data in class " + std::to_string(c));
    const std::size_t idx = pools[c].back();
    pools[c].pop_back();
    return data[idx];
  };

  const auto dominant_count =
      static_cast<std::size_t>(std::lround(spec.non_iid_degree * static_cast<double>(spec.per_client_size)));
  std::vector<Dataset> clients(spec.n_clients);
  for (std::size_t i = 0; i < spec.n_clients; ++i) {
    auto& local = clients[i];
    local.reserve(spec.per_client_size);
    const std::size_t dominant = i % classes;
    for (std::size_t k = 0; k < dominant_count; ++k) local.push_back(take(dominant));
    while (local.size() < spec.per_client_size) {
      std::size_t c = rng.below(classes);
      if (pools[c].empty()) {
        // Fall back to a uniformly chosen class that still has samples.
        std::vector<std::size_t> open;
        for (std::size_t j = 0; j < classes; ++j)
          if (!pools[j].empty()) open.push_back(j);
        if (open.empty()) throw DomainError("partition_non_iid: insufficient data");
        c = open[rng.below(open.size())];
      }
      local.push_back(take(c));
    }
    rng.shuffle(local);
  }
  return clients;
}

void validate(const PoisonSpec& spec, std::size_t features) {
  if (spec.trigger_coords.empty()) throw DomainError("poison spec: trigger coordinates are empty");
  for (std::size_t c : spec.trigger_coords) {
    if (c >= features) throw DomainError("poison spec: trigger coordinate out of range");
  }
  if (!(spec.pdr >= 0.0 && spec.pdr <= 1.0)) throw DomainError("poison spec: pdr must lie in [0, 1]");
  if (spec.target_class < 0) throw DomainError("poison spec: negative target class");
}

PoisonResult poison(std::span<const Sample> data, const PoisonSpec& spec, std::uint64_t seed) {
  PoisonResult result{Dataset(data.begin(), data.end()), std::vector<bool>(data.size(), false)};
  if (data.empty()) return result;
  validate(spec, data.front().x.size());

  // The epsilon guards against pdr * n landing a hair above an integer.
  const double raw = spec.pdr * static_cast<double>(data.size());
  const auto count = std::min(data.size(), static_cast<std::size_t>(std::ceil(raw - 1e-9)));
  if (count == 0) return result;

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (spec.edge_case) {
    chosen = edge_case_order(data, rng);
    chosen.resize(count);
  } else {
    chosen = rng.sample_indices(data.size(), count);
  }
  for (std::size_t i : chosen) {
    stamp(result.data[i], spec);
    result.flags[i] = true;
  }
  return result;
}

Dataset triggered_testset(std::span<const Sample> clean, const PoisonSpec& spec) {
  Dataset out;
  if (clean.empty()) return out;
  validate(spec, clean.front().x.size());
  for (const auto& s : clean) {
    if (s.label == spec.target_class) continue;
    Sample t = s;
    stamp(t, spec);
    out.push_back(std::move(t));
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t features, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file " + path.string());

  auto parse_double = [](std::string_view field, double& out) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
    return ec == std::errc{} && ptr == field.data() + field.size();
  };

  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> fields;
    bool numeric = true;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      double v = 0.0;
      if (!parse_double(rest.substr(0, comma), v)) {
        numeric = false;
        break;
      }
      fields.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!numeric) {
      if (line_no == 1 && data.empty()) continue;  // header
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (fields.size() != features + 1) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(features + 1) + " columns");
    }
    const double label = fields.back();
    if (label != std::floor(label) || label < 0 || label >= static_cast<double>(classes)) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": invalid label");
    }
    fields.pop_back();
    for (double v : fields) {
      if (!std::isfinite(v)) throw IoError(path.string() + ":" + std::to_string(line_no) + ": non-finite feature");
    }
    data.push_back(Sample{std::move(fields), static_cast<int>(label)});
  }
  return data;
}

}  // namespace fedblock

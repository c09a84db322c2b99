#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <ostream>
#include <vector>

namespace fedblock {

struct ClientId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(ClientId, ClientId) = default;
  friend std::ostream& operator<<(std::ostream& os, ClientId id) { return os << id.value; }
};

struct Sample {
  std::vector<double> x;
  int label = 0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

using Dataset = std::vector<Sample>;

/// One verifier's scores for a round; every score is 0, 0.5 or 1.
struct ScoreReport {
  ClientId verifier{};
  int round = 0;
  std::map<ClientId, double> scores;
  friend bool operator==(const ScoreReport&, const ScoreReport&) = default;
};

}  // namespace fedblock

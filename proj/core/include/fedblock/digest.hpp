#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace fedblock {

/// SHA-256 content digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

inline constexpr std::string_view kDigestAlgorithm = "sha256";

Digest sha256(std::span<const std::uint8_t> data);

}  // namespace fedblock

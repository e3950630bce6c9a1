#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpga/model.hpp"

namespace dpga {

/// Share ratio p on the 0.1 grid, stored as its numerator p * 10 in [1, 10].
class UpdateRate {
 public:
  constexpr UpdateRate() = default;

  /// Throws ConfigError unless 1 <= tenths <= 10.
  static UpdateRate from_tenths(int tenths);
  /// Throws ConfigError unless p is (within 1e-9) a grid value in (0, 1].
  static UpdateRate from_value(double p);
  /// Nearest grid value, clamped into [0.1, 1.0]; for off-grid ratios such
  /// as a static mask fraction that still have to be tagged on the wire.
  static UpdateRate nearest(double p);

  constexpr int tenths() const noexcept { return tenths_; }
  constexpr double value() const noexcept { return tenths_ / 10.0; }

  friend constexpr auto operator<=>(UpdateRate, UpdateRate) = default;

 private:
  constexpr explicit UpdateRate(int tenths) : tenths_(tenths) {}
  int tenths_ = 10;
};

/// Strictly ascending coordinate indices that are exchanged with the server.
/// The personal mask is the complement in [0, d).
struct SharedIndexSet {
  std::vector<std::uint32_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
  bool contains(std::uint32_t j) const;
  bool operator==(const SharedIndexSet&) const = default;

  static SharedIndexSet all(std::size_t d);
};

/// Complement of shared in [0, d).
SharedIndexSet personal_indices(const SharedIndexSet& shared, std::size_t d);

/// Wire message carrying the shared part of an accumulated gradient.
struct SparseGradient {
  std::uint64_t round = 0;
  UpdateRate rate;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t size() const noexcept { return indices.size(); }
};

/// Equality on every field, comparing values by bit pattern.
bool identical(const SparseGradient& a, const SparseGradient& b) noexcept;

/// K = ceil(p * d). Products that land within relative 1e-12 above an integer
/// are treated as that integer, so 0.3 * 10 gives 3 rather than 4.
std::size_t shared_count(double p, std::size_t d);

/// Indices of the K largest |z|, ties toward the lower index, sorted ascending.
SharedIndexSet topk_shared_indices(const ParamVector& z, double p);
SharedIndexSet topk_shared_indices(const ParamVector& z, UpdateRate p);

SparseGradient extract_shared(const ParamVector& z, const SharedIndexSet& shared,
                              std::uint64_t round, UpdateRate p);

/// Dense vector: global values on its support, local values elsewhere.
ParamVector merge(const SparseGradient& global, const ParamVector& local_z);

// DPG1 layout, little-endian:
//   "DPG1" | round u64 | p*10 u8 | count u32 | count x index u32 | count x value f64
inline constexpr std::size_t kMessageHeaderBytes = 4 + 8 + 1 + 4;
inline constexpr std::size_t kMessageEntryBytes = 4 + 8;

std::vector<std::uint8_t> encode(const SparseGradient& msg);
/// Throws DecodeError on bad magic, truncation, trailing bytes, an invalid
/// rate byte or non-ascending indices.
SparseGradient decode(std::span<const std::uint8_t> bytes);

constexpr std::size_t message_bytes(std::size_t entries) noexcept {
  return kMessageHeaderBytes + kMessageEntryBytes * entries;
}
inline std::size_t message_bytes(const SparseGradient& msg) noexcept {
  return message_bytes(msg.size());
}

}  // namespace dpga

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>

#include "dpga/masking.hpp"

namespace dpga {

/// Number of update-rate states: 0.1, 0.2, ..., 1.0.
inline constexpr int kRateStates = 10;

/// Row r / column c refer to the states with r + 1 and c + 1 tenths.
using RateMatrix = std::array<std::array<double, kRateStates>, kRateStates>;
/// Probability per state, indexed by tenths - 1.
using RateDistribution = std::array<double, kRateStates>;

/// Fair-coin walk over the grid. Interior states move one step left or right
/// with probability 1/2 each; the end states hold with 1/2 and move inward
/// with 1/2.
RateMatrix one_step_matrix();

/// Row p of the m-th power of the one-step matrix.
RateDistribution transition_distribution(UpdateRate p, unsigned m);

/// Current rate plus the walk's own generator. A value type; copying forks
/// the random stream.
class RateState {
 public:
  RateState(UpdateRate p0, unsigned steps, std::uint64_t seed);

  UpdateRate rate() const noexcept { return rate_; }
  unsigned steps() const noexcept { return steps_; }

  std::string serialize_rng() const;
  void restore_rng(const std::string& text);

  friend UpdateRate sample_next(RateState& state);

 private:
  UpdateRate rate_;
  unsigned steps_;
  std::mt19937_64 rng_;
};

/// Walks m coin flips from the current rate, stores and returns the result.
UpdateRate sample_next(RateState& state);

}  // namespace dpga

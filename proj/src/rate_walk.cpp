#include "dpga/rate_walk.hpp"

#include <sstream>

#include "dpga/errors.hpp"

namespace dpga {

namespace {

// One fair-coin step with hold-at-the-boundary. s is a 0-based state.
int step(int s, bool right) {
  if (right) return s + 1 < kRateStates ? s + 1 : s;
  return s > 0 ? s - 1 : s;
}

}  // namespace

RateMatrix one_step_matrix() {
  RateMatrix m{};
  for (int s = 0; s < kRateStates; ++s) {
    m[s][step(s, false)] += 0.5;
    m[s][step(s, true)] += 0.5;
  }
  return m;
}

RateDistribution transition_distribution(UpdateRate p, unsigned m) {
  const auto one = one_step_matrix();
  RateDistribution dist{};
  dist[p.tenths() - 1] = 1.0;
  for (unsigned k = 0; k < m; ++k) {
    RateDistribution next{};
    for (int from = 0; from < kRateStates; ++from) {
      if (dist[from] == 0.0) continue;
      for (int to = 0; to < kRateStates; ++to) next[to] += dist[from] * one[from][to];
    }
    dist = next;
  }
  return dist;
}

RateState::RateState(UpdateRate p0, unsigned steps, std::uint64_t seed)
    : rate_(p0), steps_(steps), rng_(seed) {}

std::string RateState::serialize_rng() const {
  std::ostringstream out;
  out << rng_;
  return out.str();
}

void RateState::restore_rng(const std::string& text) {
  std::istringstream in(text);
  std::mt19937_64 rng;
  in >> rng;
  if (!in) throw ContractViolation("malformed rate-walk generator state");
  rng_ = rng;
}

UpdateRate sample_next(RateState& state) {
  int s = state.rate_.tenths() - 1;
  for (unsigned k = 0; k < state.steps_; ++k) s = step(s, (state.rng_() >> 63) != 0);
  state.rate_ = UpdateRate::from_tenths(s + 1);
  return state.rate_;
}

}  // namespace dpga

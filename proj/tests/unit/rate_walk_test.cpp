#include <cmath>
#include <array>
#include <vector>

#include "doctest.h"
#include "dpga/errors.hpp"
#include "dpga/rate_walk.hpp"

using namespace dpga;

namespace {

// Exhaustive oracle: every sequence of m fair coin flips, applied with a hold
// at both ends of the 1..10 grid.
RateDistribution enumerate_paths(int start_tenths, unsigned m) {
  RateDistribution dist{};
  const double weight = std::ldexp(1.0, -static_cast<int>(m));
  for (std::uint64_t path = 0; path < (std::uint64_t{1} << m); ++path) {
    int t = start_tenths;
    for (unsigned k = 0; k < m; ++k) {
      if ((path >> k) & 1u) {
        t = std::min(t + 1, 10);
      } else {
        t = std::max(t - 1, 1);
      }
    }
    dist[t - 1] += weight;
  }
  return dist;
}

double tenths_prob(const RateDistribution& d, int tenths) { return d[tenths - 1]; }

}  // namespace

TEST_SUITE("rate walk") {

TEST_CASE("one-step rows") {
  const auto m = one_step_matrix();
  for (int r = 0; r < kRateStates; ++r) {
    double sum = 0.0;
    for (double v : m[r]) sum += v;
    CHECK(sum == 1.0);
  }
  CHECK(m[4][3] == 0.5);
  CHECK(m[4][5] == 0.5);
  CHECK(m[4][4] == 0.0);
  CHECK(m[0][0] == 0.5);
  CHECK(m[0][1] == 0.5);
  CHECK(m[9][9] == 0.5);
  CHECK(m[9][8] == 0.5);
}

TEST_CASE("two-step examples") {
  const auto mid = transition_distribution(UpdateRate::from_value(0.5), 2);
  CHECK(tenths_prob(mid, 3) == 0.25);
  CHECK(tenths_prob(mid, 5) == 0.5);
  CHECK(tenths_prob(mid, 7) == 0.25);
  CHECK(tenths_prob(mid, 4) == 0.0);

  const auto low = transition_distribution(UpdateRate::from_value(0.1), 2);
  CHECK(tenths_prob(low, 1) == 0.5);
  CHECK(tenths_prob(low, 2) == 0.25);
  CHECK(tenths_prob(low, 3) == 0.25);
}

TEST_CASE("zero steps is the identity") {
  for (int t = 1; t <= 10; ++t) {
    const auto d = transition_distribution(UpdateRate::from_tenths(t), 0);
    for (int u = 1; u <= 10; ++u) CHECK(tenths_prob(d, u) == (u == t ? 1.0 : 0.0));
  }
}

TEST_CASE("matrix powers match path enumeration") {
  for (unsigned m = 0; m <= 16; ++m) {
    for (int t = 1; t <= 10; ++t) {
      const auto got = transition_distribution(UpdateRate::from_tenths(t), m);
      const auto want = enumerate_paths(t, m);
      double sum = 0.0;
      for (int u = 0; u < kRateStates; ++u) {
        REQUIRE(std::abs(got[u] - want[u]) <= 1e-12);
        sum += got[u];
      }
      REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("mirror symmetry and bounded reach") {
  for (unsigned m = 1; m <= 8; ++m) {
    for (int t = 1; t <= 10; ++t) {
      const auto d = transition_distribution(UpdateRate::from_tenths(t), m);
      const auto mirror = transition_distribution(UpdateRate::from_tenths(11 - t), m);
      for (int u = 1; u <= 10; ++u) {
        CHECK(std::abs(tenths_prob(d, u) - tenths_prob(mirror, 11 - u)) <= 1e-15);
        if (std::abs(u - t) > static_cast<int>(m)) CHECK(tenths_prob(d, u) == 0.0);
      }
    }
  }
}

TEST_CASE("sample frequencies agree with the distribution") {
  constexpr int kSamples = 100000;
  for (int start : {1, 5, 10}) {
    for (unsigned m : {1u, 2u, 5u}) {
      const auto p0 = UpdateRate::from_tenths(start);
      const auto dist = transition_distribution(p0, m);
      std::array<int, kRateStates> counts{};
      const std::uint64_t base = 1000u * static_cast<std::uint64_t>(start) + m;
      for (int i = 0; i < kSamples; ++i) {
        RateState s(p0, m, base * kSamples + static_cast<std::uint64_t>(i));
        ++counts[sample_next(s).tenths() - 1];
      }
      for (int u = 0; u < kRateStates; ++u) {
        const double q = dist[u];
        const double sigma = std::sqrt(kSamples * q * (1.0 - q));
        CHECK(std::abs(counts[u] - kSamples * q) <= 3.0 * sigma + 1e-9);
      }
    }
  }
}

TEST_CASE("walk is reproducible from its seed and generator state") {
  RateState a(UpdateRate::from_value(0.5), 2, 77);
  RateState b(UpdateRate::from_value(0.5), 2, 77);
  for (int i = 0; i < 200; ++i) CHECK(sample_next(a) == sample_next(b));

  const auto saved = a.serialize_rng();
  const auto rate = a.rate();
  std::vector<int> first;
  for (int i = 0; i < 50; ++i) first.push_back(sample_next(a).tenths());

  RateState c(rate, 2, 1);
  c.restore_rng(saved);
  for (int i = 0; i < 50; ++i) CHECK(sample_next(c).tenths() == first[i]);

  CHECK_THROWS_AS(c.restore_rng("not a generator"), ContractViolation);
}

TEST_CASE("zero steps never moves") {
  RateState s(UpdateRate::from_value(0.3), 0, 5);
  for (int i = 0; i < 20; ++i) CHECK(sample_next(s).tenths() == 3);
}

TEST_CASE("off-grid starting rates are rejected") {
  CHECK_THROWS_AS(UpdateRate::from_value(0.55), ConfigError);
}

}  // TEST_SUITE

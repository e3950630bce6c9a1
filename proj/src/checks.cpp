#include "dpga/checks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "dpga/data.hpp"
#include "dpga/masking.hpp"
#include "dpga/model.hpp"
#include "dpga/rate_walk.hpp"
#include "dpga/sim.hpp"

namespace dpga {

namespace {

Batch random_batch(std::mt19937_64& rng, std::size_t dim, std::size_t classes,
                   std::size_t rows) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> label(0, static_cast<std::uint32_t>(classes - 1));
  Batch b;
  b.dim = dim;
  std::vector<double> x(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : x) v = gauss(rng);
    b.push_back(x, label(rng));
  }
  return b;
}

CheckResult gradient_suite(const std::string& name, bool mlp, double tolerance,
                           const CheckOptions& opt, std::uint64_t stream) {
  std::mt19937_64 rng(derive_seed(opt.seed, stream));
  std::uniform_int_distribution<std::size_t> dim_pick(1, 6), class_pick(2, 5),
      rows_pick(1, 8), width_pick(2, 6), depth_pick(1, 2);
  std::normal_distribution<double> gauss(0.0, 0.5);

  GradientFn gradient = loss_and_gradient;
  if (opt.inject_gradient_fault) {
    gradient = [](const ParamVector& w, const Batch& b, const ModelSpec& s) {
      auto lg = loss_and_gradient(w, b, s);
      for (auto& g : lg.grad) g *= 1.01;
      lg.grad[0] += 1e-3;
      return lg;
    };
  }

  CheckResult r{name, true, 0.0, tolerance, {}};
  constexpr int kCases = 100;
  for (int c = 0; c < kCases; ++c) {
    const auto dim = dim_pick(rng);
    const auto classes = class_pick(rng);
    ModelSpec spec;
    if (mlp) {
      std::vector<std::size_t> hidden(depth_pick(rng));
      for (auto& h : hidden) h = width_pick(rng);
      spec = ModelSpec::mlp(dim, hidden, classes, Activation::tanh);
    } else {
      spec = ModelSpec::logistic(dim, classes);
    }
    ParamVector w(spec.dimension());
    for (auto& v : w) v = gauss(rng);
    const auto batch = random_batch(rng, dim, classes, rows_pick(rng));
    const double err = finite_diff_check(w, batch, spec, 1e-6, gradient);
    r.max_error = std::max(r.max_error, err);
    if (!(err < tolerance)) r.passed = false;
  }
  r.detail = std::to_string(kCases) + " cases";
  return r;
}

int walk_step(int s, bool right) {
  if (right) return std::min(s + 1, kRateStates - 1);
  return std::max(s - 1, 0);
}

CheckResult walk_suite() {
  CheckResult r{"rate-walk", true, 0.0, 1e-12, {}};
  int cases = 0;
  for (int start = 1; start <= kRateStates; ++start) {
    for (unsigned m = 1; m <= 8; ++m) {
      RateDistribution oracle{};
      const double weight = std::ldexp(1.0, -static_cast<int>(m));
      for (std::uint32_t path = 0; path < (1u << m); ++path) {
        int s = start - 1;
        for (unsigned k = 0; k < m; ++k) s = walk_step(s, (path >> k) & 1u);
        oracle[s] += weight;
      }
      const auto dist = transition_distribution(UpdateRate::from_tenths(start), m);
      double sum = 0.0;
      for (int s = 0; s < kRateStates; ++s) {
        r.max_error = std::max(r.max_error, std::abs(dist[s] - oracle[s]));
        sum += dist[s];
      }
      r.max_error = std::max(r.max_error, std::abs(sum - 1.0));
      ++cases;
    }
  }
  r.passed = r.max_error <= r.tolerance;
  r.detail = std::to_string(cases) + " (state, m) pairs against path enumeration";
  return r;
}

CheckResult mask_suite(const CheckOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, 201));
  std::uniform_int_distribution<std::size_t> d_pick(1, 200);
  std::uniform_int_distribution<int> tenths_pick(1, 10), coarse(-3, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution tied(0.3);

  CheckResult r{"masks", true, 0.0, 0.0, {}};
  constexpr int kCases = 10000;
  int failures = 0;
  for (int c = 0; c < kCases; ++c) {
    const auto d = d_pick(rng);
    const int tenths = tenths_pick(rng);
    const bool ties = tied(rng);
    ParamVector z(d);
    for (auto& v : z) v = ties ? static_cast<double>(coarse(rng)) : gauss(rng);

    const auto shared = topk_shared_indices(z, UpdateRate::from_tenths(tenths));
    const auto personal = personal_indices(shared, d);
    const std::size_t want = (static_cast<std::size_t>(tenths) * d + 9) / 10;
    bool ok = shared.size() == want && shared.size() + personal.size() == d;

    std::vector<char> seen(d, 0);
    for (auto j : shared.indices) ok = ok && j < d && !seen[j]++;
    for (auto j : personal.indices) ok = ok && j < d && !seen[j]++;
    ok = ok && std::is_sorted(shared.indices.begin(), shared.indices.end());

    // Every shared magnitude beats every personal one; equal ones favor the
    // lower index.
    for (auto s : shared.indices) {
      for (auto q : personal.indices) {
        const double a = std::abs(z[s]), b = std::abs(z[q]);
        if (a < b || (a == b && s > q)) ok = false;
      }
    }
    if (!ok) ++failures;
  }
  r.passed = failures == 0;
  r.max_error = failures;
  r.detail = std::to_string(kCases) + " cases, " + std::to_string(failures) + " failed";
  return r;
}

CheckResult codec_suite(const CheckOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, 202));
  std::uniform_int_distribution<std::uint32_t> d_pick(0, 300);
  std::uniform_int_distribution<int> tenths_pick(1, 10);
  std::bernoulli_distribution keep(0.4);

  CheckResult r{"codec", true, 0.0, 0.0, {}};
  constexpr int kCases = 1000;
  int failures = 0;
  for (int c = 0; c < kCases; ++c) {
    SparseGradient msg;
    msg.round = rng();
    msg.rate = UpdateRate::from_tenths(tenths_pick(rng));
    const auto d = d_pick(rng);
    for (std::uint32_t j = 0; j < d; ++j) {
      if (!keep(rng)) continue;
      msg.indices.push_back(j);
      msg.values.push_back(std::bit_cast<double>(rng()));
    }
    const auto bytes = encode(msg);
    bool ok = bytes.size() == kMessageHeaderBytes + kMessageEntryBytes * msg.size();
    try {
      ok = ok && identical(decode(bytes), msg);
    } catch (const std::exception&) {
      ok = false;
    }
    if (!ok) ++failures;
  }
  r.passed = failures == 0;
  r.max_error = failures;
  r.detail = std::to_string(kCases) + " roundtrips, " + std::to_string(failures) + " failed";
  return r;
}

Workload small_workload(std::size_t clients, bool identical_shards, std::uint64_t seed) {
  const auto data = gen_synthetic(3, 4, 12, 0.8, seed);
  Workload w;
  w.model = ModelSpec::logistic(4, 3);
  w.test = data.samples;
  if (identical_shards) {
    w.shards.assign(clients, data.samples);
  } else {
    w.shards = materialize(data, partition_iid(data, clients, seed + 1));
  }
  return w;
}

SimConfig reduction_config(std::size_t clients, std::uint64_t rounds, unsigned delay) {
  SimConfig cfg;
  cfg.algorithm = Algorithm::dpga;
  cfg.num_clients = clients;
  cfg.rounds = rounds;
  cfg.local_steps = 2;
  cfg.eta = 0.1;
  cfg.timing = Timing::parallel;
  cfg.delay = delay;
  cfg.walk = WalkConfig{0, 1.0, false};
  cfg.aggregation = AggregationMode::per_component;
  return cfg;
}

// Local SGD in the accumulated form w_round = w_start - eta * (g_1 + ... + g_K).
ParamVector local_sgd_round(const ParamVector& start, const Batch& shard,
                            const ModelSpec& spec, unsigned steps, double eta,
                            ParamVector* z_out) {
  ParamVector w = start, z(start.size());
  for (unsigned k = 0; k < steps; ++k) {
    const auto g = loss_and_gradient(w, shard, spec).grad;
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += g[j];
    w = sgd_step(start, z, eta);
  }
  if (z_out) *z_out = z;
  return w;
}

CheckResult zero_correction_suite(const CheckOptions& opt) {
  CheckResult r{"reduction-zero-correction", true, 0.0, 0.0, {}};
  const auto cfg = reduction_config(4, 50, 2);
  const auto work = small_workload(cfg.num_clients, true, opt.seed);
  ParamVector reference = initial_weights(cfg, work.model);
  std::uint64_t mismatched = 0;
  const auto result = run_experiment(cfg, work, [&](std::uint64_t, std::span<const ClientState> cs) {
    reference = local_sgd_round(reference, work.shards[0], work.model, cfg.local_steps,
                                cfg.eta, nullptr);
    for (const auto& c : cs) mismatched += !bitwise_equal(c.weights, reference);
  });
  r.max_error = result.stats.max_abs_correction;
  r.passed = mismatched == 0 && result.stats.nonzero_correction_terms == 0 &&
             result.stats.corrections == cfg.num_clients * cfg.rounds;
  r.detail = std::to_string(result.stats.corrections) + " corrections, " +
             std::to_string(mismatched) + " client-rounds off the standalone trajectory";
  return r;
}

CheckResult sync_average_suite(const CheckOptions& opt) {
  CheckResult r{"reduction-sync-averaging", true, 0.0, 0.0, {}};
  const auto cfg = reduction_config(8, 30, 0);
  const auto work = small_workload(cfg.num_clients, false, opt.seed);
  ParamVector global = initial_weights(cfg, work.model);
  std::uint64_t mismatched = 0;
  run_experiment(cfg, work, [&](std::uint64_t, std::span<const ClientState> cs) {
    ParamVector mean(global.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
      ParamVector z;
      local_sgd_round(global, work.shards[i], work.model, cfg.local_steps, cfg.eta, &z);
      const double k = static_cast<double>(i + 1);
      for (std::size_t j = 0; j < z.size(); ++j) mean[j] = i == 0 ? z[j] : mean[j] + (z[j] - mean[j]) / k;
    }
    global = sgd_step(global, mean, cfg.eta);
    for (const auto& c : cs) {
      mismatched += !bitwise_equal(c.weights, global);
      for (std::size_t j = 0; j < global.size(); ++j) {
        r.max_error = std::max(r.max_error, std::abs(c.weights[j] - global[j]));
      }
    }
  });
  r.passed = mismatched == 0;
  r.detail = std::to_string(mismatched) + " client-rounds differ from direct averaging";
  return r;
}

}  // namespace

std::vector<CheckResult> run_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  out.push_back(gradient_suite("gradient-logistic", false, 1e-5, options, 101));
  out.push_back(gradient_suite("gradient-mlp", true, 1e-4, options, 102));
  out.push_back(walk_suite());
  out.push_back(mask_suite(options));
  out.push_back(codec_suite(options));
  out.push_back(zero_correction_suite(options));
  out.push_back(sync_average_suite(options));
  return out;
}

}  // namespace dpga

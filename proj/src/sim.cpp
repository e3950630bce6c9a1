#include "dpga/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <string>
#include <thread>

#include "dpga/errors.hpp"
#include "dpga/rate_walk.hpp"

namespace dpga {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kClientStream = 2;
constexpr std::uint64_t kWalkStream = 3;

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    const auto workers = std::min<std::size_t>(threads, n);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n) break;
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  // Lowest client id wins so failures are reported deterministically.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void validate_workload(const SimConfig& cfg, const Workload& w) {
  w.model.validate();
  if (w.shards.size() != cfg.num_clients) {
    throw ConfigError("workload has " + std::to_string(w.shards.size()) +
                      " shards for " + std::to_string(cfg.num_clients) + " clients");
  }
  for (std::size_t i = 0; i < w.shards.size(); ++i) {
    if (w.shards[i].empty()) {
      throw ConfigError("client " + std::to_string(i) + " has an empty shard");
    }
    if (w.shards[i].dim != w.model.input_dim) {
      throw ConfigError("client " + std::to_string(i) + " shard width mismatch");
    }
  }
  if (w.test.empty()) throw ConfigError("held-out split is empty");
}

struct InFlight {
  std::uint64_t round;
  double arrival;
  std::vector<SparseGradient> downlinks;  // one per client
};

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::dga: return "dga";
    case Algorithm::dpga: return "dpga";
    case Algorithm::static_partial: return "static-partial";
  }
  return "?";
}

std::string_view to_string(Timing t) {
  return t == Timing::sequential ? "sequential" : "parallel";
}

void SimConfig::validate() const {
  if (num_clients < 1) throw ConfigError("need at least one client", "experiment.clients");
  if (rounds < 1) throw ConfigError("need at least one round", "experiment.rounds");
  if (local_steps < 1) {
    throw ConfigError("need at least one local step", "experiment.local_steps");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw ConfigError("eta must be positive", "experiment.eta");
  }
  if (!(network.t_compute > 0.0) || !std::isfinite(network.t_compute)) {
    throw ConfigError("t_compute must be positive", "network.t_compute");
  }
  if (!(network.latency >= 0.0) || !std::isfinite(network.latency)) {
    throw ConfigError("latency must be non-negative", "network.latency");
  }
  if (!(network.bandwidth >= 0.0) || !std::isfinite(network.bandwidth)) {
    throw ConfigError("bandwidth must be non-negative", "network.bandwidth");
  }
  if (!(static_fraction > 0.0) || static_fraction > 1.0) {
    throw ConfigError("static fraction must lie in (0, 1]", "experiment.static_fraction");
  }
  if (threads < 1) throw ConfigError("threads must be at least 1", "experiment.threads");
  if (eval_every < 1) {
    throw ConfigError("eval_every must be at least 1", "experiment.eval_every");
  }
  try {
    (void)UpdateRate::from_value(walk.p0);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), "walk.p0");
  }
  if (effective_timing() == Timing::sequential && delay && *delay > 0) {
    throw ConfigError("a positive delay needs parallel timing", "experiment.delay");
  }
}

Timing SimConfig::effective_timing() const {
  if (timing) return *timing;
  return algorithm == Algorithm::fedavg || algorithm == Algorithm::static_partial
             ? Timing::sequential
             : Timing::parallel;
}

double comm_time(std::uint64_t bytes, const NetworkModel& net) {
  const double transfer =
      net.bandwidth > 0.0 ? static_cast<double>(bytes) / net.bandwidth : 0.0;
  return net.latency + transfer;
}

double dense_round_trip(std::size_t d, const NetworkModel& net) {
  return 2.0 * comm_time(message_bytes(d), net);
}

unsigned delay_for(double round_trip, double t_compute) {
  if (!(t_compute > 0.0)) throw ConfigError("t_compute must be positive");
  const double q = round_trip / t_compute;
  const double r = std::round(q);
  if (std::abs(q - r) <= 1e-9 * std::max(1.0, q)) return static_cast<unsigned>(r);
  return static_cast<unsigned>(std::ceil(q));
}

unsigned derive_delay(const SimConfig& config, std::size_t d) {
  if (config.effective_timing() == Timing::sequential) return 0;
  if (config.delay) return *config.delay;
  return delay_for(dense_round_trip(d, config.network), config.network.t_compute);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index) {
  // splitmix64 finalizer over a combined key.
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return mix(seed ^ mix(stream ^ mix(index)));
}

ParamVector initial_weights(const SimConfig& config, const ModelSpec& spec) {
  return init_params(spec, derive_seed(config.seed, kInitStream));
}

double weighted_objective(std::span<const double> losses,
                          std::span<const std::size_t> counts) {
  if (losses.size() != counts.size() || losses.empty()) {
    throw ContractViolation("weighted_objective: need one count per loss");
  }
  std::size_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) throw ContractViolation("weighted_objective: no samples");
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    total += static_cast<double>(counts[i]) / static_cast<double>(n) * losses[i];
  }
  return total;
}

ParamVector mean_weights(std::span<const ClientState> clients) {
  if (clients.empty()) throw ContractViolation("mean_weights: no clients");
  ParamVector mean = clients.front().weights;
  for (std::size_t i = 1; i < clients.size(); ++i) {
    const auto& w = clients[i].weights;
    const double k = static_cast<double>(i + 1);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += (w[j] - mean[j]) / k;
  }
  return mean;
}

double objective(std::span<const ClientState> clients, const ModelSpec& spec) {
  const auto w = mean_weights(clients);
  std::vector<double> losses;
  std::vector<std::size_t> counts;
  for (const auto& c : clients) {
    losses.push_back(batch_loss(w, c.shard, spec));
    counts.push_back(c.num_samples());
  }
  return weighted_objective(losses, counts);
}

SimResult run_experiment(const SimConfig& cfg, const Workload& workload,
                         const RoundObserver& observer) {
  cfg.validate();
  validate_workload(cfg, workload);

  const auto& spec = workload.model;
  const std::size_t d = spec.dimension();
  const std::size_t n_clients = cfg.num_clients;
  const Timing timing = cfg.effective_timing();
  const unsigned delay = derive_delay(cfg, d);
  const double t_compute = cfg.network.t_compute;

  const bool fedavg = cfg.algorithm == Algorithm::fedavg;
  const AggregationMode mode = fedavg ? AggregationMode::per_component : cfg.aggregation;
  const CorrectionScope scope = cfg.correction;

  const ParamVector w0 = initial_weights(cfg, spec);
  std::vector<ClientState> clients;
  clients.reserve(n_clients);
  for (std::size_t i = 0; i < n_clients; ++i) {
    clients.push_back(make_client(i, w0, workload.shards[i], delay,
                                  derive_seed(cfg.seed, kClientStream, i)));
  }

  std::vector<double> beta;
  if (fedavg) {
    std::size_t n = 0;
    for (const auto& c : clients) n += c.num_samples();
    for (const auto& c : clients) {
      beta.push_back(static_cast<double>(c.num_samples()) / static_cast<double>(n));
    }
  }

  const UpdateRate p0 = UpdateRate::from_value(cfg.walk.p0);
  std::vector<RateState> walks;
  if (cfg.algorithm == Algorithm::dpga) {
    const std::size_t count = cfg.walk.per_client ? n_clients : 1;
    for (std::size_t i = 0; i < count; ++i) {
      walks.emplace_back(p0, cfg.walk.steps, derive_seed(cfg.seed, kWalkStream, i));
    }
  }
  const SharedIndexSet static_mask = cfg.algorithm == Algorithm::static_partial
                                         ? static_partial_mask(spec, cfg.static_fraction)
                                         : SharedIndexSet{};
  const UpdateRate static_tag = UpdateRate::nearest(cfg.static_fraction);

  SimResult result;
  auto& stats = result.stats;
  stats.delay = delay;
  stats.timing = timing;

  std::deque<InFlight> inflight;
  std::vector<ParamVector> zs(n_clients);
  std::vector<SparseGradient> uploads(n_clients);
  std::vector<UpdateRate> rates(n_clients, UpdateRate::from_tenths(10));
  double clock = 0.0;
  std::uint64_t up_total = 0;
  std::uint64_t down_total = 0;
  MetricsRecord last_eval;

  auto deliver = [&](InFlight& flight) {
    for (std::size_t i = 0; i < n_clients; ++i) {
      const auto s = apply_correction(clients[i], flight.downlinks[i], cfg.eta, scope);
      ++stats.corrections;
      stats.nonzero_correction_terms += s.nonzero_terms;
      stats.max_abs_correction = std::max(stats.max_abs_correction, s.max_abs_term);
      down_total += message_bytes(flight.downlinks[i]);
    }
    stats.correction_times.push_back(clock);
  };

  for (std::uint64_t t = 1; t <= cfg.rounds; ++t) {
    const double start = clock;

    // Rate for this round: p0 first, then one walk transition per round.
    int tenths_sum = 0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      switch (cfg.algorithm) {
        case Algorithm::dpga: {
          auto& walk = walks[cfg.walk.per_client ? i : 0];
          if (i == 0 || cfg.walk.per_client) {
            rates[i] = t == 1 ? walk.rate() : sample_next(walk);
          } else {
            rates[i] = rates[0];
          }
          break;
        }
        case Algorithm::static_partial:
          rates[i] = static_tag;
          break;
        default:
          rates[i] = UpdateRate::from_tenths(10);
      }
      tenths_sum += rates[i].tenths();
    }
    const double p_round = cfg.algorithm == Algorithm::static_partial
                               ? cfg.static_fraction
                               : tenths_sum / (10.0 * static_cast<double>(n_clients));

    parallel_for(n_clients, cfg.threads, [&](std::size_t i) {
      zs[i] = local_round(clients[i], spec, cfg.local_steps, cfg.eta, cfg.batch_size);
      uploads[i] = cfg.algorithm == Algorithm::static_partial
                       ? build_upload(clients[i], zs[i], static_mask, static_tag, t, scope)
                       : build_upload(clients[i], zs[i], rates[i], t, scope);
    });

    std::uint64_t max_up = 0;
    for (const auto& u : uploads) {
      const auto b = message_bytes(u);
      up_total += b;
      max_up = std::max<std::uint64_t>(max_up, b);
    }
    const auto agg = server_aggregate(uploads, mode, n_clients, beta);
    ++stats.aggregates;

    InFlight flight{t, 0.0, {}};
    std::uint64_t max_down = 0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      const auto& own = clients[i].pending.back();
      flight.downlinks.push_back(scope == CorrectionScope::own_shared
                                     ? agg.restricted_to(own.shared_set, own.z_shared.rate)
                                     : agg.as_message(own.z_shared.rate));
      max_down = std::max<std::uint64_t>(max_down, message_bytes(flight.downlinks.back()));
    }
    const double compute_end = start + t_compute;
    const double round_comm = comm_time(max_up, cfg.network) + comm_time(max_down, cfg.network);
    flight.arrival = compute_end + round_comm;
    stats.round_comm_times.push_back(round_comm);
    stats.upload_done_times.push_back(compute_end + comm_time(max_up, cfg.network));
    inflight.push_back(std::move(flight));

    // Boundary after round t: the aggregate of round t - delay is due.
    clock = compute_end;
    while (!inflight.empty() && inflight.front().round + delay <= t) {
      if (inflight.front().arrival > clock) {
        clock = inflight.front().arrival;
        ++stats.stalls;
      }
      deliver(inflight.front());
      inflight.pop_front();
    }
    if (t == cfg.rounds) {
      while (!inflight.empty()) {
        clock = std::max(clock, inflight.front().arrival);
        deliver(inflight.front());
        inflight.pop_front();
      }
    }

    MetricsRecord rec;
    rec.round = t;
    rec.sim_time = clock;
    rec.up_bytes = up_total;
    rec.down_bytes = down_total;
    rec.p = p_round;
    if (t % cfg.eval_every == 0 || t == cfg.rounds || t == 1) {
      const auto w_mean = mean_weights(clients);
      rec.train_loss = objective(clients, spec);
      rec.eval_acc = evaluate(w_mean, workload.test, spec).accuracy;
      double acc_sum = 0.0;
      for (const auto& c : clients) acc_sum += evaluate(c.weights, workload.test, spec).accuracy;
      rec.eval_acc_clients = acc_sum / static_cast<double>(n_clients);
      last_eval = rec;
    } else {
      rec.train_loss = last_eval.train_loss;
      rec.eval_acc = last_eval.eval_acc;
      rec.eval_acc_clients = last_eval.eval_acc_clients;
    }
    result.records.push_back(rec);

    if (observer) observer(t, clients);
  }

  for (const auto& c : clients) {
    stats.pending_left += c.pending.size();
    if (!c.weights.all_finite()) {
      throw ContractViolation("client " + std::to_string(c.id) +
                              " weights diverged to a non-finite value");
    }
    result.final_weights.push_back(c.weights);
  }
  return result;
}

}  // namespace dpga

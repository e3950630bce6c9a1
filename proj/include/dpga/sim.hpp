#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpga/model.hpp"
#include "dpga/protocol.hpp"

namespace dpga {

enum class Algorithm { fedavg, dga, dpga, static_partial };
enum class Timing { sequential, parallel };

std::string_view to_string(Algorithm a);
std::string_view to_string(Timing t);

struct NetworkModel {
  double bandwidth = 0.0;  // bytes per time unit; 0 means unlimited
  double latency = 0.0;    // per message direction
  double t_compute = 1.0;  // one local round
};

struct WalkConfig {
  unsigned steps = 2;  // m
  double p0 = 0.5;
  bool per_client = false;
};

struct SimConfig {
  Algorithm algorithm = Algorithm::dpga;
  std::size_t num_clients = 10;
  std::uint64_t rounds = 100;
  unsigned local_steps = 1;
  double eta = 0.1;
  std::size_t batch_size = 0;
  std::optional<Timing> timing;   // unset: sequential for fedavg/static-partial
  std::optional<unsigned> delay;  // unset: derived from the network model
  NetworkModel network;
  WalkConfig walk;
  AggregationMode aggregation = AggregationMode::per_component;
  CorrectionScope correction = CorrectionScope::own_shared;
  double static_fraction = 0.25;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  unsigned eval_every = 1;

  /// Throws ConfigError.
  void validate() const;
  Timing effective_timing() const;
};

struct MetricsRecord {
  std::uint64_t round = 0;
  double sim_time = 0.0;
  std::uint64_t up_bytes = 0;    // cumulative
  std::uint64_t down_bytes = 0;  // cumulative
  double p = 1.0;                // mean rate used this round
  double train_loss = 0.0;       // weighted objective at the mean weights
  double eval_acc = 0.0;         // mean weights on the held-out split
  double eval_acc_clients = 0.0; // mean of per-client accuracies
};

struct Workload {
  ModelSpec model;
  std::vector<Batch> shards;  // one per client
  Batch test;
};

struct RunStats {
  unsigned delay = 0;
  Timing timing = Timing::parallel;
  std::uint64_t aggregates = 0;
  std::uint64_t corrections = 0;  // client-level correction events
  std::uint64_t nonzero_correction_terms = 0;
  double max_abs_correction = 0.0;
  std::uint64_t stalls = 0;       // boundaries that waited on the network
  std::size_t pending_left = 0;
  std::vector<double> round_comm_times;
  std::vector<double> upload_done_times;
  std::vector<double> correction_times;  // indexed like rounds
};

struct SimResult {
  std::vector<MetricsRecord> records;
  std::vector<ParamVector> final_weights;
  RunStats stats;
};

/// Called after every round's boundary (corrections applied).
using RoundObserver =
    std::function<void(std::uint64_t round, std::span<const ClientState> clients)>;

/// latency + bytes / bandwidth.
double comm_time(std::uint64_t bytes, const NetworkModel& net);

/// Upload plus download of dense (p = 1) messages for a d-parameter model.
double dense_round_trip(std::size_t d, const NetworkModel& net);

/// ceil(round_trip / t_compute) with a small tolerance for exact quotients.
unsigned delay_for(double round_trip, double t_compute);

/// The configured delay, or the smallest one that never stalls at p = 1.
/// Sequential timing always yields 0.
unsigned derive_delay(const SimConfig& config, std::size_t d);

/// Mixes (seed, stream, index) into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index = 0);

/// The common starting point every client of a run with this seed receives.
ParamVector initial_weights(const SimConfig& config, const ModelSpec& spec);

/// Sum_i n_i / n * loss_i.
double weighted_objective(std::span<const double> losses,
                          std::span<const std::size_t> counts);

/// Coordinate-wise running mean of the clients' weights, in client order.
ParamVector mean_weights(std::span<const ClientState> clients);

/// Weighted objective of the clients' shards at the mean of their weights.
double objective(std::span<const ClientState> clients, const ModelSpec& spec);

SimResult run_experiment(const SimConfig& config, const Workload& workload,
                         const RoundObserver& observer = {});

}  // namespace dpga

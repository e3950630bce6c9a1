#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "dpga/masking.hpp"
#include "dpga/model.hpp"

namespace dpga {

enum class AggregationMode {
  per_component,  // mean over the clients that shared the coordinate
  divide_by_n,    // sum over sharing clients divided by the client count
};

enum class CorrectionScope {
  own_shared,    // correct only the coordinates this client uploaded
  full_support,  // correct every coordinate the aggregate defines
};

/// A round whose global aggregate has not arrived yet.
struct PendingRound {
  std::uint64_t round = 0;
  SparseGradient z_shared;    // what this client uploaded
  SharedIndexSet shared_set;  // == z_shared.indices
  ParamVector z_full;         // whole accumulated gradient; full_support only
};

struct ClientState {
  std::size_t id = 0;
  ParamVector weights;
  /// Weights at the start of the most recent local round, and that round's
  /// effective accumulated gradient. weights == sgd_step(anchor, z_latest, eta)
  /// holds bitwise after every local round and every correction.
  ParamVector anchor;
  ParamVector z_latest;
  Batch shard;
  std::size_t max_pending = 0;  // the delay D
  std::deque<PendingRound> pending;
  std::mt19937_64 rng;

  std::size_t num_samples() const noexcept { return shard.size(); }
};

ClientState make_client(std::size_t id, ParamVector initial_weights, Batch shard,
                        std::size_t delay, std::uint64_t seed);

/// K SGD steps on the client's shard. batch_size 0 (or >= shard size) uses the
/// full shard, otherwise a fresh random subset without replacement per step.
/// Returns z, the sum of the K gradients; afterwards
/// weights == sgd_step(weights_before, z, eta) bitwise.
ParamVector local_round(ClientState& client, const ModelSpec& spec,
                        unsigned local_steps, double eta, std::size_t batch_size);

/// Top-K shared part of z at rate p; queues the matching PendingRound.
SparseGradient build_upload(ClientState& client, const ParamVector& z,
                            UpdateRate p, std::uint64_t round,
                            CorrectionScope scope = CorrectionScope::own_shared);

/// Same with a caller-chosen mask (static partial sharing).
SparseGradient build_upload(ClientState& client, const ParamVector& z,
                            const SharedIndexSet& shared, UpdateRate tag,
                            std::uint64_t round,
                            CorrectionScope scope = CorrectionScope::own_shared);

/// Server-side result of one round. Coordinates nobody shared are absent.
struct GlobalAggregate {
  std::uint64_t round = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::vector<std::uint32_t> contributors;

  std::size_t size() const noexcept { return indices.size(); }
  std::optional<double> value_at(std::uint32_t j) const;

  /// The aggregate as one dense-support downlink message.
  SparseGradient as_message(UpdateRate tag) const;
  /// Only the coordinates in shared that the aggregate defines.
  SparseGradient restricted_to(const SharedIndexSet& shared, UpdateRate tag) const;
};

/// Reduces messages in the order given (ascending client id by convention).
/// weights, when non-empty, holds one beta_i per message and is only valid in
/// per-component mode.
GlobalAggregate server_aggregate(std::span<const SparseGradient> messages,
                                 AggregationMode mode, std::size_t num_clients,
                                 std::span<const double> weights = {});

struct CorrectionStats {
  std::size_t coordinates = 0;
  std::size_t nonzero_terms = 0;  // coordinates where aggregate != own value
  double max_abs_term = 0.0;
};

/// Folds the delayed aggregate for the oldest pending round into the client:
/// on each covered coordinate the round's own contribution is swapped for the
/// global value, i.e. weights_j -= eta * (global_j - own_j). Pops that round.
CorrectionStats apply_correction(ClientState& client, const SparseGradient& downlink,
                                 double eta,
                                 CorrectionScope scope = CorrectionScope::own_shared);
CorrectionStats apply_correction(ClientState& client, const GlobalAggregate& agg,
                                 double eta,
                                 CorrectionScope scope = CorrectionScope::own_shared);

/// The last ceil(fraction * d) coordinates, i.e. the output-side layer first.
SharedIndexSet static_partial_mask(const ModelSpec& spec, double fraction);

}  // namespace dpga

#include "dpga/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dpga/errors.hpp"

namespace dpga {

namespace {

// z_latest - own + global, associated so that whichever pair cancels does so
// exactly: an unchanged round keeps its gradient bit for bit, and a correction
// to the round still in hand becomes a plain substitution.
double corrected_component(double z_latest, double own, double global) {
  if (z_latest == own) return global;
  return z_latest + (global - own);
}

std::vector<std::size_t> sample_rows(std::mt19937_64& rng, std::size_t n,
                                     std::size_t batch_size) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  rows.resize(batch_size);
  return rows;
}

}  // namespace

ClientState make_client(std::size_t id, ParamVector initial_weights, Batch shard,
                        std::size_t delay, std::uint64_t seed) {
  ClientState c;
  c.id = id;
  c.anchor = initial_weights;
  c.z_latest = ParamVector(initial_weights.size());
  c.weights = std::move(initial_weights);
  c.shard = std::move(shard);
  c.max_pending = delay;
  c.rng.seed(seed);
  return c;
}

ParamVector local_round(ClientState& client, const ModelSpec& spec,
                        unsigned local_steps, double eta, std::size_t batch_size) {
  if (local_steps == 0) throw ConfigError("local_steps must be at least 1");
  if (client.shard.empty()) {
    throw ConfigError("client " + std::to_string(client.id) + " has an empty shard");
  }
  const bool full = batch_size == 0 || batch_size >= client.shard.size();

  client.anchor = client.weights;
  ParamVector z(client.weights.size());
  for (unsigned k = 0; k < local_steps; ++k) {
    LossAndGradient lg;
    if (full) {
      lg = loss_and_gradient(client.weights, client.shard, spec);
    } else {
      const auto rows = sample_rows(client.rng, client.shard.size(), batch_size);
      lg = loss_and_gradient(client.weights, client.shard.gather(rows), spec);
    }
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += lg.grad[j];
    // Re-deriving from the anchor keeps the round's telescoped form exact.
    client.weights = sgd_step(client.anchor, z, eta);
  }
  client.z_latest = z;
  return z;
}

SparseGradient build_upload(ClientState& client, const ParamVector& z,
                            UpdateRate p, std::uint64_t round,
                            CorrectionScope scope) {
  return build_upload(client, z, topk_shared_indices(z, p), p, round, scope);
}

SparseGradient build_upload(ClientState& client, const ParamVector& z,
                            const SharedIndexSet& shared, UpdateRate tag,
                            std::uint64_t round, CorrectionScope scope) {
  if (client.pending.size() > client.max_pending) {
    throw ProtocolError("client " + std::to_string(client.id) + " already holds " +
                        std::to_string(client.pending.size()) +
                        " pending rounds (delay " +
                        std::to_string(client.max_pending) + ")");
  }
  if (!client.pending.empty() && client.pending.back().round >= round) {
    throw ProtocolError("upload for round " + std::to_string(round) +
                        " is not after pending round " +
                        std::to_string(client.pending.back().round));
  }
  PendingRound entry;
  entry.round = round;
  entry.z_shared = extract_shared(z, shared, round, tag);
  entry.shared_set = shared;
  if (scope == CorrectionScope::full_support) entry.z_full = z;
  client.pending.push_back(std::move(entry));
  return client.pending.back().z_shared;
}

std::optional<double> GlobalAggregate::value_at(std::uint32_t j) const {
  const auto it = std::lower_bound(indices.begin(), indices.end(), j);
  if (it == indices.end() || *it != j) return std::nullopt;
  return values[static_cast<std::size_t>(it - indices.begin())];
}

SparseGradient GlobalAggregate::as_message(UpdateRate tag) const {
  return SparseGradient{round, tag, indices, values};
}

SparseGradient GlobalAggregate::restricted_to(const SharedIndexSet& shared,
                                              UpdateRate tag) const {
  SparseGradient msg{round, tag, {}, {}};
  std::size_t a = 0;
  for (auto j : shared.indices) {
    while (a < indices.size() && indices[a] < j) ++a;
    if (a < indices.size() && indices[a] == j) {
      msg.indices.push_back(j);
      msg.values.push_back(values[a]);
    }
  }
  return msg;
}

GlobalAggregate server_aggregate(std::span<const SparseGradient> messages,
                                 AggregationMode mode, std::size_t num_clients,
                                 std::span<const double> weights) {
  if (messages.empty()) throw ContractViolation("server_aggregate: no messages");
  if (!weights.empty() && weights.size() != messages.size()) {
    throw ContractViolation("server_aggregate: one weight per message required");
  }
  if (!weights.empty() && mode != AggregationMode::per_component) {
    throw ContractViolation("server_aggregate: weights need per-component mode");
  }
  if (num_clients == 0) throw ContractViolation("server_aggregate: zero clients");

  std::uint32_t bound = 0;
  for (const auto& m : messages) {
    if (m.round != messages.front().round) {
      throw ContractViolation("server_aggregate: mixed rounds " +
                              std::to_string(messages.front().round) + " and " +
                              std::to_string(m.round));
    }
    if (m.indices.size() != m.values.size()) {
      throw ContractViolation("server_aggregate: malformed message");
    }
    if (!m.indices.empty()) bound = std::max(bound, m.indices.back() + 1);
  }

  // Running (weighted) mean per coordinate: m += (v - m) * w / W. Identical
  // contributions therefore average to themselves exactly.
  std::vector<double> acc(bound, 0.0);
  std::vector<double> weight_sum(bound, 0.0);
  std::vector<std::uint32_t> count(bound, 0);
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const auto& m = messages[i];
    for (std::size_t k = 0; k < m.size(); ++k) {
      const auto j = m.indices[k];
      const double v = m.values[k];
      ++count[j];
      if (mode == AggregationMode::divide_by_n) {
        acc[j] += v;
      } else if (count[j] == 1) {
        acc[j] = v;
        weight_sum[j] = w;
      } else {
        weight_sum[j] += w;
        acc[j] += (v - acc[j]) * w / weight_sum[j];
      }
    }
  }

  GlobalAggregate agg;
  agg.round = messages.front().round;
  for (std::uint32_t j = 0; j < bound; ++j) {
    if (count[j] == 0) continue;
    agg.indices.push_back(j);
    agg.values.push_back(mode == AggregationMode::divide_by_n
                             ? acc[j] / static_cast<double>(num_clients)
                             : acc[j]);
    agg.contributors.push_back(count[j]);
  }
  return agg;
}

CorrectionStats apply_correction(ClientState& client, const SparseGradient& downlink,
                                 double eta, CorrectionScope scope) {
  if (client.pending.empty()) {
    throw ProtocolError("client " + std::to_string(client.id) +
                        " received round " + std::to_string(downlink.round) +
                        " with nothing pending");
  }
  const PendingRound& front = client.pending.front();
  if (front.round != downlink.round) {
    throw ProtocolError("client " + std::to_string(client.id) + " expected round " +
                        std::to_string(front.round) + ", received " +
                        std::to_string(downlink.round));
  }
  if (downlink.indices.size() != downlink.values.size()) {
    throw ContractViolation("apply_correction: malformed downlink");
  }

  CorrectionStats stats;
  const auto& own_idx = front.z_shared.indices;
  const auto& own_val = front.z_shared.values;
  std::size_t a = 0;
  for (std::size_t k = 0; k < downlink.size(); ++k) {
    const auto j = downlink.indices[k];
    if (j >= client.weights.size()) {
      throw ContractViolation("apply_correction: index " + std::to_string(j) +
                              " out of range");
    }
    while (a < own_idx.size() && own_idx[a] < j) ++a;
    double own;
    if (a < own_idx.size() && own_idx[a] == j) {
      own = own_val[a];
    } else if (scope == CorrectionScope::full_support && !front.z_full.empty()) {
      own = front.z_full[j];
    } else {
      continue;
    }
    const double global = downlink.values[k];
    const double term = global - own;
    ++stats.coordinates;
    if (term != 0.0) ++stats.nonzero_terms;
    stats.max_abs_term = std::max(stats.max_abs_term, std::abs(term));

    const double eff = corrected_component(client.z_latest[j], own, global);
    client.z_latest[j] = eff;
    client.weights[j] = client.anchor[j] - eta * eff;
  }
  client.pending.pop_front();
  return stats;
}

CorrectionStats apply_correction(ClientState& client, const GlobalAggregate& agg,
                                 double eta, CorrectionScope scope) {
  if (client.pending.empty()) {
    throw ProtocolError("client " + std::to_string(client.id) +
                        " received round " + std::to_string(agg.round) +
                        " with nothing pending");
  }
  const auto& front = client.pending.front();
  const auto msg = scope == CorrectionScope::own_shared
                       ? agg.restricted_to(front.shared_set, front.z_shared.rate)
                       : agg.as_message(front.z_shared.rate);
  return apply_correction(client, msg, eta, scope);
}

SharedIndexSet static_partial_mask(const ModelSpec& spec, double fraction) {
  const std::size_t d = spec.dimension();
  const std::size_t k = shared_count(fraction, d);
  SharedIndexSet s;
  s.indices.resize(k);
  std::iota(s.indices.begin(), s.indices.end(), static_cast<std::uint32_t>(d - k));
  return s;
}

}  // namespace dpga

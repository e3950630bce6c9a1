#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "dpga/model.hpp"

namespace dpga {

struct Dataset {
  Batch samples;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return samples.size(); }
};

/// per_class samples for each class, drawn around a unit-norm class mean with
/// isotropic Gaussian noise of standard deviation spread. Samples are grouped
/// by class (all of class 0 first).
Dataset gen_synthetic(std::size_t num_classes, std::size_t dim,
                      std::size_t per_class, double spread, std::uint64_t seed);

/// Stratified split: round(test_fraction * count) samples of every class go to
/// the second dataset. Deterministic in seed.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data,
                                             double test_fraction,
                                             std::uint64_t seed);

struct PartitionConfig {
  double alpha = 1.0;  // Dirichlet concentration
  double rho = 1.0;    // per-(client, class) presence probability
  std::size_t num_clients = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Sample indices of each client's shard, ascending.
using Partition = std::vector<std::vector<std::size_t>>;

/// Presence ~ Bernoulli(rho) per (client, class), classes nobody holds are
/// redrawn; each class is then split over its holders with Dirichlet(alpha)
/// proportions and largest-remainder rounding.
Partition partition(const Dataset& data, const PartitionConfig& cfg);

/// Round-robin split of a shuffled index order; the IID reference.
Partition partition_iid(const Dataset& data, std::size_t num_clients,
                        std::uint64_t seed);

struct PartitionStats {
  std::vector<std::vector<std::size_t>> histogram;  // [client][class]
  std::vector<std::size_t> counts;                  // n_i
};

PartitionStats partition_stats(const Partition& shards, const Dataset& data);

std::vector<Batch> materialize(const Dataset& data, const Partition& shards);

/// CSV with header index,label,client, one row per sample in index order.
void write_partition_csv(std::ostream& out, const Dataset& data,
                         const Partition& shards);

}  // namespace dpga

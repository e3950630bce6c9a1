#include "dpga/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dpga/errors.hpp"

namespace dpga {

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<std::size_t>> by_class(data.num_classes);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto y = data.samples.labels[n];
    if (y >= data.num_classes) throw ContractViolation("label outside num_classes");
    by_class[y].push_back(n);
  }
  return by_class;
}

Dataset subset(const Dataset& data, std::vector<std::size_t> rows) {
  std::sort(rows.begin(), rows.end());
  return Dataset{data.samples.gather(rows), data.num_classes};
}

// Integer counts summing to total, proportional to weights; leftover units go
// to the largest fractional parts, ties to the lower position.
std::vector<std::size_t> largest_remainder(const std::vector<double>& weights,
                                           std::size_t total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size(), 0);
  std::vector<double> frac(weights.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = weights[i] / sum * static_cast<double>(total);
    counts[i] = std::min(total, static_cast<std::size_t>(std::floor(quota)));
    frac[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  // Floating error can leave assigned a unit above total; trim from the back.
  while (assigned > total) {
    for (auto it = order.rbegin(); it != order.rend() && assigned > total; ++it) {
      if (counts[*it] > 0) {
        --counts[*it];
        --assigned;
      }
    }
  }
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

}  // namespace

Dataset gen_synthetic(std::size_t num_classes, std::size_t dim,
                      std::size_t per_class, double spread, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("need at least 2 classes", "data.classes");
  if (dim < 1) throw ConfigError("feature dimension must be positive", "data.dim");
  if (per_class < 1) throw ConfigError("need at least one sample per class", "data.per_class");
  if (!(spread >= 0.0) || !std::isfinite(spread)) {
    throw ConfigError("spread must be non-negative", "data.spread");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim));
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (dim == 1) {
      means[c][0] = static_cast<double>(c) - 0.5 * static_cast<double>(num_classes - 1);
      continue;
    }
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : means[c]) {
        v = gauss(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& v : means[c]) v /= norm;
  }

  Dataset data;
  data.num_classes = num_classes;
  data.samples.dim = dim;
  data.samples.features.reserve(num_classes * per_class * dim);
  std::vector<double> x(dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      for (std::size_t j = 0; j < dim; ++j) x[j] = means[c][j] + spread * gauss(rng);
      data.samples.push_back(x, static_cast<std::uint32_t>(c));
    }
  }
  return data;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data,
                                             double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw ConfigError("test fraction must lie in (0, 1)", "data.test_fraction");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train, test;
  for (auto& rows : indices_by_class(data)) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto k = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(rows.size())));
    test.insert(test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
    train.insert(train.end(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end());
  }
  if (train.empty() || test.empty()) {
    throw ConfigError("train/test split leaves one side empty", "data.test_fraction");
  }
  return {subset(data, std::move(train)), subset(data, std::move(test))};
}

void PartitionConfig::validate() const {
  if (num_clients < 1) throw ConfigError("need at least one client", "experiment.clients");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha must be positive", "partition.alpha");
  }
  if (!(rho > 0.0) || rho > 1.0) throw ConfigError("rho must lie in (0, 1]", "partition.rho");
}

Partition partition(const Dataset& data, const PartitionConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution present(cfg.rho);
  std::gamma_distribution<double> gamma(cfg.alpha, 1.0);

  const std::size_t n_clients = cfg.num_clients;
  auto by_class = indices_by_class(data);

  // presence[c][i]: client i holds class c.
  std::vector<std::vector<char>> presence(data.num_classes, std::vector<char>(n_clients));
  for (auto& column : presence) {
    bool any = false;
    while (!any) {
      for (auto& cell : column) {
        cell = present(rng) ? 1 : 0;
        any = any || cell;
      }
    }
  }

  Partition shards(n_clients);
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    auto& rows = by_class[c];
    std::shuffle(rows.begin(), rows.end(), rng);

    std::vector<std::size_t> holders;
    for (std::size_t i = 0; i < n_clients; ++i) {
      if (presence[c][i]) holders.push_back(i);
    }
    std::vector<double> props(holders.size());
    for (auto& p : props) p = gamma(rng);
    if (std::accumulate(props.begin(), props.end(), 0.0) == 0.0) {
      // Every draw underflowed; give the class to the first holder.
      props.assign(props.size(), 0.0);
      props.front() = 1.0;
    }
    const auto counts = largest_remainder(props, rows.size());

    std::size_t next = 0;
    for (std::size_t h = 0; h < holders.size(); ++h) {
      auto& shard = shards[holders[h]];
      shard.insert(shard.end(), rows.begin() + static_cast<std::ptrdiff_t>(next),
                   rows.begin() + static_cast<std::ptrdiff_t>(next + counts[h]));
      next += counts[h];
    }
  }
  for (auto& s : shards) std::sort(s.begin(), s.end());
  return shards;
}

Partition partition_iid(const Dataset& data, std::size_t num_clients,
                        std::uint64_t seed) {
  if (num_clients < 1) throw ConfigError("need at least one client", "experiment.clients");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Partition shards(num_clients);
  for (std::size_t k = 0; k < order.size(); ++k) shards[k % num_clients].push_back(order[k]);
  for (auto& s : shards) std::sort(s.begin(), s.end());
  return shards;
}

PartitionStats partition_stats(const Partition& shards, const Dataset& data) {
  PartitionStats stats;
  stats.histogram.assign(shards.size(), std::vector<std::size_t>(data.num_classes, 0));
  stats.counts.assign(shards.size(), 0);
  for (std::size_t i = 0; i < shards.size(); ++i) {
    for (auto n : shards[i]) {
      if (n >= data.size()) throw ContractViolation("partition index out of range");
      ++stats.histogram[i][data.samples.labels[n]];
    }
    stats.counts[i] = shards[i].size();
  }
  return stats;
}

std::vector<Batch> materialize(const Dataset& data, const Partition& shards) {
  std::vector<Batch> out;
  out.reserve(shards.size());
  for (const auto& s : shards) out.push_back(data.samples.gather(s));
  return out;
}

void write_partition_csv(std::ostream& out, const Dataset& data,
                         const Partition& shards) {
  std::vector<std::size_t> owner(data.size(), shards.size());
  for (std::size_t i = 0; i < shards.size(); ++i) {
    for (auto n : shards[i]) owner[n] = i;
  }
  out << "index,label,client\n";
  for (std::size_t n = 0; n < data.size(); ++n) {
    out << n << ',' << data.samples.labels[n] << ',' << owner[n] << '\n';
  }
}

}  // namespace dpga

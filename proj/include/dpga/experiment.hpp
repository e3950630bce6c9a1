#pragma once

#include "dpga/config.hpp"
#include "dpga/data.hpp"
#include "dpga/sim.hpp"

namespace dpga {

/// Dataset, split and partition materialized from a spec.
struct PreparedExperiment {
  Dataset train;
  Dataset test;
  Partition shards;
  Workload workload;
};

PreparedExperiment prepare(const ExperimentSpec& spec);

SimResult run(const ExperimentSpec& spec);

}  // namespace dpga

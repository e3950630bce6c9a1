#include "dpga/experiment.hpp"

namespace dpga {

PreparedExperiment prepare(const ExperimentSpec& spec) {
  PreparedExperiment out;
  const auto all = gen_synthetic(spec.data.classes, spec.data.dim, spec.data.per_class,
                                 spec.data.spread, spec.data.seed);
  std::tie(out.train, out.test) =
      split_train_test(all, spec.data.test_fraction, spec.split_seed);
  out.shards = spec.scheme == PartitionScheme::iid
                   ? partition_iid(out.train, spec.partition.num_clients,
                                   spec.partition.seed)
                   : partition(out.train, spec.partition);
  out.workload.model = spec.model;
  out.workload.shards = materialize(out.train, out.shards);
  out.workload.test = out.test.samples;
  return out;
}

SimResult run(const ExperimentSpec& spec) {
  return run_experiment(spec.sim, prepare(spec).workload);
}

}  // namespace dpga

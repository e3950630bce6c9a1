#include "dpga/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "dpga/errors.hpp"

namespace dpga {

namespace {

constexpr std::uint64_t kDataStream = 10;
constexpr std::uint64_t kPartitionStream = 11;
constexpr std::uint64_t kSplitStream = 12;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

class Resolver {
 public:
  Resolver(const ExperimentFile& file,
           const std::function<std::size_t(const std::string&)>& line_of)
      : file_(file), line_of_(line_of) {}

  std::string text(const std::string& key) const { return file_.get(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(key + ": " + what + " (got '" + text(key) + "')", key,
                      line_of_(key));
  }

  std::uint64_t uint(const std::string& key) const {
    const auto s = text(key);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      fail(key, "expected a non-negative integer");
    }
    errno = 0;
    const auto v = std::strtoull(s.c_str(), nullptr, 10);
    if (errno == ERANGE) fail(key, "integer out of range");
    return v;
  }

  double real(const std::string& key) const {
    const auto s = text(key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
      fail(key, "expected a finite number");
    }
    return v;
  }

  bool boolean(const std::string& key) const {
    const auto s = text(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(key, "expected true or false");
  }

  template <typename T>
  T choice(const std::string& key,
           std::initializer_list<std::pair<std::string_view, T>> options) const {
    const auto s = text(key);
    for (const auto& [name, value] : options) {
      if (s == name) return value;
    }
    std::string names;
    for (const auto& [name, value] : options) {
      names += names.empty() ? "" : "|";
      names += name;
    }
    fail(key, "expected one of " + names);
  }

  std::uint64_t seed_or(const std::string& key, std::uint64_t fallback) const {
    return text(key) == "auto" ? fallback : uint(key);
  }

 private:
  const ExperimentFile& file_;
  const std::function<std::size_t(const std::string&)>& line_of_;
};

}  // namespace

const std::vector<KeyInfo>& ExperimentFile::known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"experiment.algorithm", "dpga", "fedavg | dga | dpga | static-partial"},
      {"experiment.clients", "10", "number of clients N"},
      {"experiment.rounds", "100", "communication rounds T"},
      {"experiment.local_steps", "1", "SGD steps per round K"},
      {"experiment.eta", "0.1", "learning rate"},
      {"experiment.batch_size", "0", "minibatch size, 0 = full shard"},
      {"experiment.timing", "auto", "auto | sequential | parallel"},
      {"experiment.delay", "auto", "delay D in rounds, or auto"},
      {"experiment.aggregation", "per-component", "per-component | divide-by-n"},
      {"experiment.correction", "own-shared", "own-shared | full-support"},
      {"experiment.static_fraction", "0.25", "shared suffix for static-partial"},
      {"experiment.seed", "1", "master seed"},
      {"experiment.threads", "1", "worker threads for local rounds"},
      {"experiment.eval_every", "1", "evaluation cadence in rounds"},
      {"network.bandwidth", "0", "bytes per time unit, 0 = unlimited"},
      {"network.latency", "0", "time units per message direction"},
      {"network.t_compute", "1", "time units per local round"},
      {"walk.m", "2", "coin flips per rate transition"},
      {"walk.p0", "0.5", "initial update rate"},
      {"walk.per_client", "false", "independent walk per client"},
      {"model.kind", "logistic", "logistic | mlp"},
      {"model.hidden", "", "comma-separated hidden widths for mlp"},
      {"model.activation", "tanh", "tanh | relu"},
      {"data.classes", "10", "number of classes"},
      {"data.dim", "20", "feature dimension"},
      {"data.per_class", "100", "samples per class before the split"},
      {"data.spread", "1.0", "noise standard deviation"},
      {"data.test_fraction", "0.2", "held-out share per class"},
      {"data.seed", "auto", "dataset seed, auto = derived from experiment.seed"},
      {"partition.scheme", "dirichlet", "dirichlet | iid"},
      {"partition.alpha", "1.0", "Dirichlet concentration"},
      {"partition.rho", "1.0", "class presence probability"},
      {"partition.seed", "auto", "partition seed, auto = derived"},
      {"output.metrics", "", "metrics CSV path"},
      {"output.partition", "", "optional index,label,client dump"},
  };
  return keys;
}

bool ExperimentFile::is_known(std::string_view key) {
  const auto& keys = known_keys();
  return std::any_of(keys.begin(), keys.end(),
                     [key](const KeyInfo& k) { return k.name == key; });
}

void ExperimentFile::parse(std::string_view text) {
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find_first_of("#;");
    auto line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header '" +
                              line + "'",
                          {}, line_no);
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value", {},
                        line_no);
    }
    const auto name = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    const auto key = section.empty() ? name : section + "." + name;
    if (!is_known(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'",
                        key, line_no);
    }
    if (auto it = values_.find(key); it != values_.end() && it->second.line != 0) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key +
                            "' (first set on line " + std::to_string(it->second.line) + ")",
                        key, line_no);
    }
    values_[key] = Entry{value, line_no};
  }
}

void ExperimentFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  parse(text.str());
}

void ExperimentFile::set(const std::string& key, const std::string& value) {
  if (!is_known(key)) throw ConfigError("unknown key '" + key + "'", key, 0);
  values_[key] = Entry{trim(value), 0};
}

std::string ExperimentFile::get(const std::string& key) const {
  if (auto it = values_.find(key); it != values_.end()) return it->second.value;
  for (const auto& k : known_keys()) {
    if (k.name == key) return std::string(k.default_value);
  }
  throw ConfigError("unknown key '" + key + "'", key, 0);
}

bool ExperimentFile::is_explicit(const std::string& key) const {
  return values_.count(key) != 0;
}

std::vector<std::string> ExperimentFile::defaulted_keys() const {
  std::vector<std::string> out;
  for (const auto& k : known_keys()) {
    if (!is_explicit(std::string(k.name))) out.emplace_back(k.name);
  }
  return out;
}

std::string ExperimentFile::describe() const {
  std::string out;
  for (const auto& k : known_keys()) {
    const std::string key(k.name);
    out += key + " = " + get(key);
    if (!is_explicit(key)) out += "  (default)";
    out += '\n';
  }
  return out;
}

ExperimentSpec ExperimentFile::resolve() const {
  const std::function<std::size_t(const std::string&)> line_of =
      [this](const std::string& key) -> std::size_t {
    auto it = values_.find(key);
    return it == values_.end() ? 0 : it->second.line;
  };
  const Resolver r(*this, line_of);

  ExperimentSpec spec;
  auto& sim = spec.sim;
  sim.algorithm = r.choice<Algorithm>("experiment.algorithm",
                                      {{"fedavg", Algorithm::fedavg},
                                       {"dga", Algorithm::dga},
                                       {"dpga", Algorithm::dpga},
                                       {"static-partial", Algorithm::static_partial}});
  sim.num_clients = r.uint("experiment.clients");
  sim.rounds = r.uint("experiment.rounds");
  sim.local_steps = static_cast<unsigned>(r.uint("experiment.local_steps"));
  sim.eta = r.real("experiment.eta");
  sim.batch_size = r.uint("experiment.batch_size");
  const auto timing = get("experiment.timing");
  if (timing != "auto") {
    sim.timing = r.choice<Timing>("experiment.timing", {{"sequential", Timing::sequential},
                                                        {"parallel", Timing::parallel}});
  }
  if (get("experiment.delay") != "auto") {
    sim.delay = static_cast<unsigned>(r.uint("experiment.delay"));
  }
  sim.aggregation = r.choice<AggregationMode>(
      "experiment.aggregation", {{"per-component", AggregationMode::per_component},
                                 {"divide-by-n", AggregationMode::divide_by_n}});
  sim.correction = r.choice<CorrectionScope>(
      "experiment.correction", {{"own-shared", CorrectionScope::own_shared},
                                {"full-support", CorrectionScope::full_support}});
  sim.static_fraction = r.real("experiment.static_fraction");
  sim.seed = r.uint("experiment.seed");
  sim.threads = static_cast<unsigned>(r.uint("experiment.threads"));
  sim.eval_every = static_cast<unsigned>(r.uint("experiment.eval_every"));
  sim.network.bandwidth = r.real("network.bandwidth");
  sim.network.latency = r.real("network.latency");
  sim.network.t_compute = r.real("network.t_compute");
  sim.walk.steps = static_cast<unsigned>(r.uint("walk.m"));
  sim.walk.p0 = r.real("walk.p0");
  sim.walk.per_client = r.boolean("walk.per_client");

  spec.data.classes = r.uint("data.classes");
  spec.data.dim = r.uint("data.dim");
  spec.data.per_class = r.uint("data.per_class");
  spec.data.spread = r.real("data.spread");
  spec.data.test_fraction = r.real("data.test_fraction");
  spec.data.seed = r.seed_or("data.seed", derive_seed(sim.seed, kDataStream));
  spec.split_seed = derive_seed(spec.data.seed, kSplitStream);

  const auto kind = r.choice<ModelKind>(
      "model.kind", {{"logistic", ModelKind::logistic_regression}, {"mlp", ModelKind::mlp}});
  const auto activation = r.choice<Activation>(
      "model.activation", {{"tanh", Activation::tanh}, {"relu", Activation::relu}});
  std::vector<std::size_t> hidden;
  {
    std::istringstream in(get("model.hidden"));
    std::string part;
    while (std::getline(in, part, ',')) {
      part = trim(part);
      if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
        r.fail("model.hidden", "expected comma-separated positive integers");
      }
      hidden.push_back(std::stoull(part));
    }
  }
  spec.model = kind == ModelKind::mlp
                   ? ModelSpec::mlp(spec.data.dim, hidden, spec.data.classes, activation)
                   : ModelSpec::logistic(spec.data.dim, spec.data.classes);
  if (kind == ModelKind::logistic_regression && !hidden.empty()) {
    r.fail("model.hidden", "logistic regression takes no hidden layers");
  }

  spec.scheme = r.choice<PartitionScheme>(
      "partition.scheme", {{"dirichlet", PartitionScheme::dirichlet}, {"iid", PartitionScheme::iid}});
  spec.partition.alpha = r.real("partition.alpha");
  spec.partition.rho = r.real("partition.rho");
  spec.partition.num_clients = sim.num_clients;
  spec.partition.seed = r.seed_or("partition.seed", derive_seed(sim.seed, kPartitionStream));

  spec.metrics_path = get("output.metrics");
  spec.partition_path = get("output.partition");

  // Attach line numbers to validation failures that name a key.
  auto with_line = [&](auto&& validate) {
    try {
      validate();
    } catch (const ConfigError& e) {
      if (e.key().empty() || e.line() != 0) throw;
      throw ConfigError(e.what(), e.key(), line_of(e.key()));
    }
  };
  with_line([&] { sim.validate(); });
  with_line([&] { spec.partition.validate(); });
  with_line([&] { spec.model.validate(); });
  return spec;
}

}  // namespace dpga

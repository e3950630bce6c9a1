#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dpga/data.hpp"
#include "dpga/model.hpp"
#include "dpga/sim.hpp"

namespace dpga {

struct DataConfig {
  std::size_t classes = 10;
  std::size_t dim = 20;
  std::size_t per_class = 100;
  double spread = 1.0;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

enum class PartitionScheme { dirichlet, iid };

/// Everything one run needs, fully typed and defaulted.
struct ExperimentSpec {
  SimConfig sim;
  ModelSpec model;
  DataConfig data;
  PartitionScheme scheme = PartitionScheme::dirichlet;
  PartitionConfig partition;
  std::uint64_t split_seed = 0;
  std::string metrics_path;
  std::string partition_path;
};

struct KeyInfo {
  std::string_view name;           // section.key
  std::string_view default_value;
  std::string_view help;
};

/// Sectioned key-value experiment file:
///
///   # comment
///   [experiment]
///   algorithm = dpga
///   [walk]
///   m = 2
///
/// Keys are addressed as section.key. Unknown keys and duplicates are errors.
class ExperimentFile {
 public:
  static const std::vector<KeyInfo>& known_keys();
  static bool is_known(std::string_view key);

  /// Throws ConfigError with the offending line.
  void parse(std::string_view text);
  void load(const std::string& path);
  /// Overrides win over file values; line is reported as 0.
  void set(const std::string& key, const std::string& value);

  /// Effective value (explicit or default).
  std::string get(const std::string& key) const;
  bool is_explicit(const std::string& key) const;
  std::vector<std::string> defaulted_keys() const;

  /// One "key = value" line per known key; defaulted ones are marked.
  std::string describe() const;

  /// Typed view; throws ConfigError naming the key and line on bad values.
  ExperimentSpec resolve() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  std::map<std::string, Entry, std::less<>> values_;
};

}  // namespace dpga

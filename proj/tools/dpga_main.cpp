// Command-line front end: run, sweep, check and plot.

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpga/dpga.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitChecksFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct ConfigDeleter {
  void operator()(dpga_config* c) const { dpga_config_destroy(c); }
};
struct ResultDeleter {
  void operator()(dpga_result* r) const { dpga_result_destroy(r); }
};
using ConfigPtr = std::unique_ptr<dpga_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<dpga_result, ResultDeleter>;

void log(const std::string& line) { std::cerr << "dpga: " << line << '\n'; }

int exit_code_for(dpga_status s) {
  switch (s) {
    case DPGA_OK: return kExitOk;
    case DPGA_ERR_CONTRACT:
    case DPGA_ERR_PROTOCOL:
    case DPGA_ERR_INTERNAL: return kExitRuntime;
    default: return kExitUsage;
  }
}

int report_failure(dpga_status s) {
  std::string msg = std::string("error (") + dpga_status_name(s) + "): " + dpga_last_error();
  const std::string key = dpga_last_error_key();
  if (!key.empty() && msg.find(key) == std::string::npos) msg += " [key " + key + "]";
  if (const auto line = dpga_last_error_line(); line > 0) {
    msg += " [line " + std::to_string(line) + "]";
  }
  log(msg);
  return exit_code_for(s);
}

std::string config_value(const dpga_config* cfg, const char* key) {
  std::size_t needed = 0;
  if (dpga_config_get(cfg, key, nullptr, 0, &needed) != DPGA_OK) return {};
  std::string value(needed, '\0');
  dpga_config_get(cfg, key, value.data(), value.size(), &needed);
  value.resize(needed ? needed - 1 : 0);
  return value;
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::string seed;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "experiment file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "override section.key=value (repeatable)")
      ->allow_extra_args(false);
  cmd->add_option("--seed", o.seed, "master seed; beats DPGA_SEED and the file");
  cmd->add_option("--threads", o.threads, "worker threads for local rounds");
}

// Builds the configuration: file, then --set overrides, then the seed in
// flag > environment > file order. Logs every key left at its default.
dpga_status load_config(const CommonOptions& o, ConfigPtr& out) {
  dpga_config* raw = nullptr;
  if (auto s = dpga_config_create(&raw); s != DPGA_OK) return s;
  ConfigPtr cfg(raw);
  if (!o.config_path.empty()) {
    if (auto s = dpga_config_load(cfg.get(), o.config_path.c_str()); s != DPGA_OK) return s;
  }
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      log("error: --set expects section.key=value, got '" + kv + "'");
      return DPGA_ERR_CONFIG;
    }
    const auto key = kv.substr(0, eq);
    const auto value = kv.substr(eq + 1);
    if (auto s = dpga_config_set(cfg.get(), key.c_str(), value.c_str()); s != DPGA_OK) {
      return s;
    }
  }
  std::string seed = o.seed;
  if (seed.empty()) {
    if (const char* env = std::getenv("DPGA_SEED"); env && *env) {
      seed = env;
      log(std::string("seed ") + env + " taken from DPGA_SEED");
    }
  }
  if (!seed.empty()) {
    if (auto s = dpga_config_set(cfg.get(), "experiment.seed", seed.c_str()); s != DPGA_OK) {
      return s;
    }
  }
  if (o.threads > 0) {
    const auto t = std::to_string(o.threads);
    if (auto s = dpga_config_set(cfg.get(), "experiment.threads", t.c_str()); s != DPGA_OK) {
      return s;
    }
  }
  if (auto s = dpga_config_validate(cfg.get()); s != DPGA_OK) return s;

  std::size_t needed = 0;
  dpga_config_describe(cfg.get(), nullptr, 0, &needed);
  std::string text(needed, '\0');
  dpga_config_describe(cfg.get(), text.data(), text.size(), &needed);
  std::istringstream lines(text.c_str());
  for (std::string line; std::getline(lines, line);) {
    const auto mark = line.find("  (default)");
    if (mark != std::string::npos) log("default " + line.substr(0, mark));
  }
  out = std::move(cfg);
  return DPGA_OK;
}

int write_outputs(const dpga_config* cfg, const dpga_result* result, std::string out) {
  if (out.empty()) out = config_value(cfg, "output.metrics");
  if (out.empty()) {
    // No destination: the CSV goes to stdout.
    std::size_t needed = 0;
    dpga_result_csv(result, nullptr, 0, &needed);
    std::string text(needed, '\0');
    if (auto s = dpga_result_csv(result, text.data(), text.size(), &needed); s != DPGA_OK) {
      return report_failure(s);
    }
    std::fwrite(text.data(), 1, needed - 1, stdout);
  } else {
    if (auto s = dpga_result_write_csv(result, out.c_str()); s != DPGA_OK) {
      return report_failure(s);
    }
    log("metrics written to " + out);
  }
  const auto partition = config_value(cfg, "output.partition");
  if (!partition.empty()) {
    if (auto s = dpga_write_partition(cfg, partition.c_str()); s != DPGA_OK) {
      return report_failure(s);
    }
    log("partition written to " + partition);
  }
  return kExitOk;
}

void log_run(const dpga_result* result) {
  dpga_run_info info{};
  dpga_result_info(result, &info);
  const auto rows = dpga_result_rows(result);
  dpga_record last{};
  if (rows) dpga_result_row(result, rows - 1, &last);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%zu rounds, d=%zu, delay=%u, %s timing, final eval_acc=%.4f, "
                "up=%llu B, down=%llu B, sim_time=%.6g",
                rows, info.dimension, info.delay, info.parallel ? "parallel" : "sequential",
                last.eval_acc, static_cast<unsigned long long>(last.up_bytes),
                static_cast<unsigned long long>(last.down_bytes), last.sim_time);
  log(buf);
}

int cmd_run(const CommonOptions& o) {
  ConfigPtr cfg;
  if (auto s = load_config(o, cfg); s != DPGA_OK) return report_failure(s);
  dpga_result* raw = nullptr;
  if (auto s = dpga_run(cfg.get(), &raw); s != DPGA_OK) return report_failure(s);
  ResultPtr result(raw);
  log_run(result.get());
  return write_outputs(cfg.get(), result.get(), o.out);
}

std::string file_safe(const std::string& value) {
  std::string s;
  for (char c : value) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    s += ok ? c : '_';
  }
  return s;
}

int cmd_sweep(const CommonOptions& o, const std::string& axis,
              const std::vector<std::string>& raw_values) {
  std::vector<std::string> values;
  for (const auto& v : raw_values) {
    if (!v.empty()) values.push_back(v);
  }
  if (values.empty()) {
    log("error: --values must list at least one value");
    return kExitUsage;
  }
  const fs::path dir = o.out.empty() ? fs::path("sweep") : fs::path(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    log("error: cannot create " + dir.string() + ": " + ec.message());
    return kExitUsage;
  }

  std::vector<ResultPtr> results;
  std::vector<std::string> labels;
  for (const auto& value : values) {
    CommonOptions run = o;
    run.overrides.push_back(axis + "=" + value);
    ConfigPtr cfg;
    if (auto s = load_config(run, cfg); s != DPGA_OK) return report_failure(s);
    log("sweep " + axis + "=" + value);
    dpga_result* raw = nullptr;
    if (auto s = dpga_run(cfg.get(), &raw); s != DPGA_OK) return report_failure(s);
    results.emplace_back(raw);
    log_run(raw);
    const auto file = dir / (file_safe(value) + ".csv");
    if (auto s = dpga_result_write_csv(raw, file.c_str()); s != DPGA_OK) {
      return report_failure(s);
    }
    labels.push_back(value);
  }

  std::vector<const char*> label_ptrs;
  std::vector<const dpga_result*> result_ptrs;
  for (std::size_t i = 0; i < results.size(); ++i) {
    label_ptrs.push_back(labels[i].c_str());
    result_ptrs.push_back(results[i].get());
  }
  const auto summary = dir / "summary.csv";
  if (auto s = dpga_write_summary(summary.c_str(), label_ptrs.data(), result_ptrs.data(),
                                  results.size());
      s != DPGA_OK) {
    return report_failure(s);
  }
  log("wrote " + std::to_string(results.size()) + " runs and " + summary.string());
  return kExitOk;
}

void print_check(const char* suite, int passed, double max_error, double tolerance,
                 const char* detail, void*) {
  std::printf("%s %-26s max_error=%.3e tolerance=%.1e  %s\n", passed ? "PASS" : "FAIL",
              suite, max_error, tolerance, detail);
}

int cmd_check(const std::string& fault) {
  unsigned flags = 0;
  if (fault == "gradient") {
    flags |= DPGA_CHECK_INJECT_GRADIENT_FAULT;
  } else if (!fault.empty()) {
    log("error: unknown fault '" + fault + "'");
    return kExitUsage;
  }
  int all = 0;
  if (auto s = dpga_check(flags, print_check, nullptr, &all); s != DPGA_OK) {
    return report_failure(s);
  }
  std::fflush(stdout);
  return all ? kExitOk : kExitChecksFailed;
}

int cmd_plot(const std::vector<std::string>& files, const std::string& x,
             const std::string& out) {
  std::vector<std::string> stems;
  std::vector<const char*> paths, labels;
  for (const auto& f : files) stems.push_back(fs::path(f).stem().string());
  for (std::size_t i = 0; i < files.size(); ++i) {
    paths.push_back(files[i].c_str());
    labels.push_back(stems[i].c_str());
  }
  if (auto s = dpga_plot(paths.data(), labels.data(), paths.size(), x.c_str(), out.c_str());
      s != DPGA_OK) {
    return report_failure(s);
  }
  log("plot written to " + out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed personalized gradient averaging simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dpga_version()));

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "run one experiment and write its metrics CSV");
  add_common(run, run_opts);
  run->add_option("--out", run_opts.out, "metrics CSV path (default: output.metrics or stdout)");

  CommonOptions sweep_opts;
  std::string axis;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "run once per value of one key");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", axis, "section.key to vary")->required();
  sweep->add_option("--values", values, "comma-separated values")
      ->required()
      ->delimiter(',')
      ->expected(0, -1);
  sweep->add_option("--out", sweep_opts.out, "output directory (default: sweep)");

  std::string fault;
  auto* check = app.add_subcommand("check", "run the built-in oracle suites");
  check->add_option("--inject-fault", fault)->group("");  // test fixture only

  std::vector<std::string> files;
  std::string x = "round";
  std::string plot_out = "plot.svg";
  auto* plot = app.add_subcommand("plot", "render eval_acc curves of metrics CSVs to SVG");
  plot->add_option("files", files, "metrics CSV files")->required();
  plot->add_option("--x", x, "x axis: round, sim_time or up_bytes");
  plot->add_option("--out", plot_out, "SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*run) return cmd_run(run_opts);
  if (*sweep) return cmd_sweep(sweep_opts, axis, values);
  if (*check) return cmd_check(fault);
  if (*plot) return cmd_plot(files, x, plot_out);
  return kExitUsage;
}

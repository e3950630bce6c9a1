#include "dpga/dpga.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "dpga/checks.hpp"
#include "dpga/config.hpp"
#include "dpga/errors.hpp"
#include "dpga/experiment.hpp"
#include "dpga/masking.hpp"
#include "dpga/report.hpp"

struct dpga_config {
  dpga::ExperimentFile file;
};

struct dpga_result {
  dpga::SimResult result;
  std::size_t dimension = 0;
};

struct dpga_message {
  dpga::SparseGradient msg;
};

namespace {

struct LastError {
  std::string message;
  std::string key;
  std::size_t line = 0;
  std::size_t position = 0;
};

thread_local LastError last_error;

dpga_status fail(dpga_status status, std::string message, std::string key = {},
                 std::size_t line = 0, std::size_t position = 0) {
  last_error = LastError{std::move(message), std::move(key), line, position};
  return status;
}

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs body, translating exceptions into status codes.
template <typename Fn>
dpga_status guarded(Fn&& body) {
  try {
    body();
    return DPGA_OK;
  } catch (const dpga::ConfigError& e) {
    return fail(DPGA_ERR_CONFIG, e.what(), e.key(), e.line());
  } catch (const dpga::DecodeError& e) {
    return fail(DPGA_ERR_DECODE, e.what(), {}, 0, e.position());
  } catch (const dpga::FormatError& e) {
    return fail(DPGA_ERR_FORMAT, e.what(), {}, 0, e.row());
  } catch (const dpga::ProtocolError& e) {
    return fail(DPGA_ERR_PROTOCOL, e.what());
  } catch (const dpga::ContractViolation& e) {
    return fail(DPGA_ERR_CONTRACT, e.what());
  } catch (const IoError& e) {
    return fail(DPGA_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DPGA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DPGA_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DPGA_ERR_INTERNAL, "unknown error");
  }
}

dpga_status copy_out(const void* data, std::size_t size, void* buf, std::size_t cap,
                     std::size_t* needed) {
  if (needed) *needed = size;
  if (!buf && cap == 0) {
    return needed ? DPGA_OK : fail(DPGA_ERR_ARGUMENT, "no output buffer");
  }
  if (!buf || cap < size) return fail(DPGA_ERR_ARGUMENT, "output buffer too small");
  if (size) std::memcpy(buf, data, size);
  return DPGA_OK;
}

dpga_status copy_string(const std::string& s, char* buf, std::size_t cap,
                        std::size_t* needed) {
  return copy_out(s.c_str(), s.size() + 1, buf, cap, needed);
}

dpga_status null_argument(const char* what) {
  return fail(DPGA_ERR_ARGUMENT, std::string(what) + " is NULL");
}

std::ofstream open_output(const char* path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(std::string("cannot open ") + path + " for writing");
  return out;
}

void finish_output(std::ofstream& out, const char* path) {
  out.flush();
  if (!out) throw IoError(std::string("failed writing ") + path);
}

}  // namespace

extern "C" {

const char* dpga_version(void) { return "1.0.0"; }

const char* dpga_status_name(dpga_status status) {
  switch (status) {
    case DPGA_OK: return "ok";
    case DPGA_ERR_CONFIG: return "config";
    case DPGA_ERR_CONTRACT: return "contract";
    case DPGA_ERR_PROTOCOL: return "protocol";
    case DPGA_ERR_DECODE: return "decode";
    case DPGA_ERR_FORMAT: return "format";
    case DPGA_ERR_IO: return "io";
    case DPGA_ERR_ARGUMENT: return "argument";
    case DPGA_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* dpga_last_error(void) { return last_error.message.c_str(); }
const char* dpga_last_error_key(void) { return last_error.key.c_str(); }
size_t dpga_last_error_line(void) { return last_error.line; }
size_t dpga_last_error_position(void) { return last_error.position; }

dpga_status dpga_config_create(dpga_config** out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = new dpga_config; });
}

void dpga_config_destroy(dpga_config* config) { delete config; }

dpga_status dpga_config_load(dpga_config* config, const char* path) {
  if (!config || !path) return null_argument("config or path");
  if (!std::filesystem::is_regular_file(path)) {
    return fail(DPGA_ERR_IO, std::string("cannot read config file ") + path);
  }
  return guarded([&] { config->file.load(path); });
}

dpga_status dpga_config_parse(dpga_config* config, const char* text) {
  if (!config || !text) return null_argument("config or text");
  return guarded([&] { config->file.parse(text); });
}

dpga_status dpga_config_set(dpga_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return null_argument("config, key or value");
  return guarded([&] { config->file.set(key, value); });
}

dpga_status dpga_config_get(const dpga_config* config, const char* key, char* buf,
                            size_t cap, size_t* needed) {
  if (!config || !key) return null_argument("config or key");
  std::string value;
  const auto status = guarded([&] { value = config->file.get(key); });
  return status == DPGA_OK ? copy_string(value, buf, cap, needed) : status;
}

dpga_status dpga_config_is_explicit(const dpga_config* config, const char* key, int* out) {
  if (!config || !key || !out) return null_argument("config, key or out");
  return guarded([&] {
    if (!dpga::ExperimentFile::is_known(key)) {
      throw dpga::ConfigError(std::string("unknown key ") + key, key);
    }
    *out = config->file.is_explicit(key) ? 1 : 0;
  });
}

dpga_status dpga_config_validate(const dpga_config* config) {
  if (!config) return null_argument("config");
  return guarded([&] {
    const auto spec = config->file.resolve();
    spec.sim.validate();
    spec.model.validate();
    spec.partition.validate();
  });
}

dpga_status dpga_config_describe(const dpga_config* config, char* buf, size_t cap,
                                 size_t* needed) {
  if (!config) return null_argument("config");
  return copy_string(config->file.describe(), buf, cap, needed);
}

dpga_status dpga_run(const dpga_config* config, dpga_result** out) {
  if (!config || !out) return null_argument("config or out");
  *out = nullptr;
  return guarded([&] {
    const auto spec = config->file.resolve();
    auto r = std::make_unique<dpga_result>();
    r->result = dpga::run(spec);
    r->dimension = spec.model.dimension();
    *out = r.release();
  });
}

void dpga_result_destroy(dpga_result* result) { delete result; }

size_t dpga_result_rows(const dpga_result* result) {
  return result ? result->result.records.size() : 0;
}

dpga_status dpga_result_row(const dpga_result* result, size_t index, dpga_record* out) {
  if (!result || !out) return null_argument("result or out");
  if (index >= result->result.records.size()) {
    return fail(DPGA_ERR_ARGUMENT, "row index out of range");
  }
  const auto& r = result->result.records[index];
  *out = dpga_record{r.round,      r.sim_time, r.up_bytes, r.down_bytes,
                     r.p,          r.train_loss, r.eval_acc, r.eval_acc_clients};
  return DPGA_OK;
}

dpga_status dpga_result_info(const dpga_result* result, dpga_run_info* out) {
  if (!result || !out) return null_argument("result or out");
  const auto& s = result->result.stats;
  out->dimension = result->dimension;
  out->clients = result->result.final_weights.size();
  out->delay = s.delay;
  out->parallel = s.timing == dpga::Timing::parallel ? 1 : 0;
  out->aggregates = s.aggregates;
  out->corrections = s.corrections;
  out->nonzero_correction_terms = s.nonzero_correction_terms;
  out->max_abs_correction = s.max_abs_correction;
  out->stalls = s.stalls;
  out->pending_left = s.pending_left;
  return DPGA_OK;
}

dpga_status dpga_result_weights(const dpga_result* result, size_t client, double* buf,
                                size_t cap, size_t* needed) {
  if (!result) return null_argument("result");
  if (client >= result->result.final_weights.size()) {
    return fail(DPGA_ERR_ARGUMENT, "client index out of range");
  }
  const auto& w = result->result.final_weights[client].values();
  if (needed) *needed = w.size();
  if (cap < w.size() || !buf) {
    return buf || cap ? fail(DPGA_ERR_ARGUMENT, "output buffer too small") : DPGA_OK;
  }
  std::memcpy(buf, w.data(), w.size() * sizeof(double));
  return DPGA_OK;
}

dpga_status dpga_result_write_csv(const dpga_result* result, const char* path) {
  if (!result || !path) return null_argument("result or path");
  return guarded([&] {
    auto out = open_output(path);
    dpga::write_metrics_csv(out, result->result.records);
    finish_output(out, path);
  });
}

dpga_status dpga_result_csv(const dpga_result* result, char* buf, size_t cap,
                            size_t* needed) {
  if (!result) return null_argument("result");
  std::ostringstream out;
  dpga::write_metrics_csv(out, result->result.records);
  return copy_string(out.str(), buf, cap, needed);
}

dpga_status dpga_write_summary(const char* path, const char* const* labels,
                               const dpga_result* const* results, size_t count) {
  if (!path || (count && (!labels || !results))) return null_argument("summary argument");
  return guarded([&] {
    std::vector<dpga::RunSummary> runs;
    for (std::size_t i = 0; i < count; ++i) {
      if (!labels[i] || !results[i]) throw dpga::ContractViolation("NULL summary entry");
      runs.push_back(dpga::summarize(labels[i], results[i]->result.records));
    }
    auto out = open_output(path);
    dpga::write_summary_csv(out, runs);
    finish_output(out, path);
  });
}

dpga_status dpga_write_partition(const dpga_config* config, const char* path) {
  if (!config || !path) return null_argument("config or path");
  return guarded([&] {
    const auto prepared = dpga::prepare(config->file.resolve());
    auto out = open_output(path);
    dpga::write_partition_csv(out, prepared.train, prepared.shards);
    finish_output(out, path);
  });
}

dpga_status dpga_check(unsigned flags, dpga_check_callback callback, void* user,
                       int* all_passed) {
  return guarded([&] {
    dpga::CheckOptions options;
    options.inject_gradient_fault = (flags & DPGA_CHECK_INJECT_GRADIENT_FAULT) != 0;
    bool ok = true;
    for (const auto& r : dpga::run_checks(options)) {
      ok = ok && r.passed;
      if (callback) {
        callback(r.suite.c_str(), r.passed ? 1 : 0, r.max_error, r.tolerance,
                 r.detail.c_str(), user);
      }
    }
    if (all_passed) *all_passed = ok ? 1 : 0;
  });
}

dpga_status dpga_plot(const char* const* csv_paths, const char* const* labels,
                      size_t count, const char* axis, const char* out_path) {
  if (!csv_paths || !axis || !out_path) return null_argument("plot argument");
  if (count == 0) return fail(DPGA_ERR_ARGUMENT, "no metrics files to plot");
  std::vector<dpga::PlotSeries> series;
  for (std::size_t i = 0; i < count; ++i) {
    if (!csv_paths[i]) return null_argument("metrics path");
    dpga::PlotSeries s;
    s.label = labels && labels[i] ? labels[i] : csv_paths[i];
    const auto status = guarded([&] {
      std::ifstream in(csv_paths[i], std::ios::binary);
      if (!in) throw IoError(std::string("cannot read ") + csv_paths[i]);
      s.rows = dpga::read_metrics_csv(in);
    });
    if (status == DPGA_ERR_FORMAT) {
      last_error.message = std::string(csv_paths[i]) + ": " + last_error.message;
    }
    if (status != DPGA_OK) return status;
    series.push_back(std::move(s));
  }
  return guarded([&] {
    const auto x = dpga::parse_plot_axis(axis);
    auto out = open_output(out_path);
    out << dpga::render_svg(series, x);
    finish_output(out, out_path);
  });
}

dpga_status dpga_message_from_dense(const double* z, size_t d, double p, uint64_t round,
                                    dpga_message** out) {
  if (!out || (!z && d)) return null_argument("z or out");
  *out = nullptr;
  return guarded([&] {
    const auto rate = dpga::UpdateRate::from_value(p);
    const dpga::ParamVector dense(std::vector<double>(z, z + d));
    auto m = std::make_unique<dpga_message>();
    m->msg = dpga::extract_shared(dense, dpga::topk_shared_indices(dense, rate), round, rate);
    *out = m.release();
  });
}

dpga_status dpga_message_decode(const uint8_t* bytes, size_t size, dpga_message** out) {
  if (!out || (!bytes && size)) return null_argument("bytes or out");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<dpga_message>();
    m->msg = dpga::decode(std::span<const std::uint8_t>(bytes, size));
    *out = m.release();
  });
}

dpga_status dpga_message_encode(const dpga_message* message, uint8_t* buf, size_t cap,
                                size_t* needed) {
  if (!message) return null_argument("message");
  const auto bytes = dpga::encode(message->msg);
  return copy_out(bytes.data(), bytes.size(), buf, cap, needed);
}

void dpga_message_destroy(dpga_message* message) { delete message; }

uint64_t dpga_message_round(const dpga_message* message) {
  return message ? message->msg.round : 0;
}

double dpga_message_rate(const dpga_message* message) {
  return message ? message->msg.rate.value() : 0.0;
}

size_t dpga_message_size(const dpga_message* message) {
  return message ? message->msg.size() : 0;
}

dpga_status dpga_message_entry(const dpga_message* message, size_t k, uint32_t* index,
                               double* value) {
  if (!message) return null_argument("message");
  if (k >= message->msg.size()) return fail(DPGA_ERR_ARGUMENT, "entry index out of range");
  if (index) *index = message->msg.indices[k];
  if (value) *value = message->msg.values[k];
  return DPGA_OK;
}

size_t dpga_message_bytes(size_t entries) { return dpga::message_bytes(entries); }

}  // extern "C"

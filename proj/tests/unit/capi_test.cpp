// Exercises the shared library through its C header only.
#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dpga/dpga.h"

namespace fs = std::filesystem;

namespace {

struct Config {
  dpga_config* handle = nullptr;
  Config() { REQUIRE(dpga_config_create(&handle) == DPGA_OK); }
  ~Config() { dpga_config_destroy(handle); }
};

struct Result {
  dpga_result* handle = nullptr;
  ~Result() { dpga_result_destroy(handle); }
};

struct Message {
  dpga_message* handle = nullptr;
  ~Message() { dpga_message_destroy(handle); }
};

const char* kSmall =
    "[experiment]\nclients = 3\nrounds = 6\nseed = 5\n"
    "[data]\nclasses = 3\ndim = 4\nper_class = 20\n";

fs::path scratch_dir(const char* name) {
  auto dir = fs::temp_directory_path() / ("dpga_capi_" + std::string(name));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string get(const Config& c, const char* key) {
  size_t needed = 0;
  REQUIRE(dpga_config_get(c.handle, key, nullptr, 0, &needed) == DPGA_OK);
  std::string buf(needed, '\0');
  REQUIRE(dpga_config_get(c.handle, key, buf.data(), buf.size(), &needed) == DPGA_OK);
  buf.resize(needed - 1);
  return buf;
}

void collect(const char* suite, int passed, double, double, const char*, void* user) {
  auto* out = static_cast<std::vector<std::pair<std::string, int>>*>(user);
  out->emplace_back(suite, passed);
}

}  // namespace

TEST_SUITE("c api") {

TEST_CASE("status names and version") {
  CHECK(std::string(dpga_status_name(DPGA_OK)) == "ok");
  CHECK(std::string(dpga_status_name(DPGA_ERR_DECODE)) == "decode");
  CHECK(std::string(dpga_version()).size() > 0);
  CHECK(dpga_config_create(nullptr) == DPGA_ERR_ARGUMENT);
}

TEST_CASE("configuration through the C surface") {
  Config c;
  CHECK(get(c, "walk.m") == "2");
  CHECK(dpga_config_parse(c.handle, "[walk]\nm = 3\n") == DPGA_OK);
  CHECK(get(c, "walk.m") == "3");
  int explicit_flag = -1;
  CHECK(dpga_config_is_explicit(c.handle, "walk.m", &explicit_flag) == DPGA_OK);
  CHECK(explicit_flag == 1);
  CHECK(dpga_config_is_explicit(c.handle, "walk.p0", &explicit_flag) == DPGA_OK);
  CHECK(explicit_flag == 0);

  CHECK(dpga_config_set(c.handle, "walk.q", "1") == DPGA_ERR_CONFIG);
  CHECK(std::string(dpga_last_error_key()) == "walk.q");

  Config bad;
  CHECK(dpga_config_parse(bad.handle, "[walk]\n\nq = 1\n") == DPGA_ERR_CONFIG);
  CHECK(std::string(dpga_last_error_key()) == "walk.q");
  CHECK(dpga_last_error_line() == 3);
  CHECK(std::string(dpga_last_error()).find("unknown key 'walk.q'") != std::string::npos);

  CHECK(dpga_config_set(c.handle, "experiment.eta", "-1") == DPGA_OK);
  CHECK(dpga_config_validate(c.handle) == DPGA_ERR_CONFIG);
  CHECK(std::string(dpga_last_error_key()) == "experiment.eta");
  CHECK(dpga_config_set(c.handle, "experiment.eta", "0.1") == DPGA_OK);
  CHECK(dpga_config_validate(c.handle) == DPGA_OK);

  size_t needed = 0;
  CHECK(dpga_config_describe(c.handle, nullptr, 0, &needed) == DPGA_OK);
  std::vector<char> text(needed);
  char tiny[4];
  CHECK(dpga_config_describe(c.handle, tiny, sizeof tiny, &needed) == DPGA_ERR_ARGUMENT);
  CHECK(dpga_config_describe(c.handle, text.data(), text.size(), &needed) == DPGA_OK);
  CHECK(std::string(text.data()).find("walk.m = 3\n") != std::string::npos);

  CHECK(dpga_config_load(c.handle, "/nonexistent/x.ini") == DPGA_ERR_IO);
  Config file;
  CHECK(dpga_config_load(file.handle, DPGA_CONFIG_DIR "/comparison.ini") == DPGA_OK);
  CHECK(get(file, "experiment.rounds") == "300");
}

TEST_CASE("running and reading results") {
  Config c;
  REQUIRE(dpga_config_parse(c.handle, kSmall) == DPGA_OK);
  Result r;
  REQUIRE(dpga_run(c.handle, &r.handle) == DPGA_OK);
  REQUIRE(dpga_result_rows(r.handle) == 6);

  dpga_record row{};
  REQUIRE(dpga_result_row(r.handle, 5, &row) == DPGA_OK);
  CHECK(row.round == 6);
  CHECK(row.up_bytes > 0);
  CHECK(row.eval_acc >= 0.0);
  CHECK(row.eval_acc <= 1.0);
  CHECK(dpga_result_row(r.handle, 6, &row) == DPGA_ERR_ARGUMENT);

  dpga_run_info info{};
  REQUIRE(dpga_result_info(r.handle, &info) == DPGA_OK);
  CHECK(info.dimension == 15);
  CHECK(info.clients == 3);
  CHECK(info.parallel == 1);
  CHECK(info.aggregates == 6);
  CHECK(info.corrections == 18);
  CHECK(info.pending_left == 0);

  size_t needed = 0;
  CHECK(dpga_result_weights(r.handle, 0, nullptr, 0, &needed) == DPGA_OK);
  CHECK(needed == 15);
  std::vector<double> w(needed);
  CHECK(dpga_result_weights(r.handle, 2, w.data(), w.size(), &needed) == DPGA_OK);
  CHECK(dpga_result_weights(r.handle, 3, w.data(), w.size(), &needed) == DPGA_ERR_ARGUMENT);

  CHECK(dpga_result_csv(r.handle, nullptr, 0, &needed) == DPGA_OK);
  std::string csv(needed, '\0');
  CHECK(dpga_result_csv(r.handle, csv.data(), csv.size(), &needed) == DPGA_OK);
  csv.resize(needed - 1);
  CHECK(csv.rfind("round,sim_time,up_bytes,down_bytes,p,train_loss,eval_acc\n", 0) == 0);

  const auto dir = scratch_dir("run");
  const auto path = (dir / "m.csv").string();
  CHECK(dpga_result_write_csv(r.handle, path.c_str()) == DPGA_OK);
  CHECK(slurp(path) == csv);
  CHECK(dpga_result_write_csv(r.handle, (dir / "missing" / "m.csv").string().c_str()) ==
        DPGA_ERR_IO);

  Result again;
  REQUIRE(dpga_run(c.handle, &again.handle) == DPGA_OK);
  std::string csv2(needed, '\0');
  CHECK(dpga_result_csv(again.handle, csv2.data(), csv2.size(), &needed) == DPGA_OK);
  csv2.resize(needed - 1);
  CHECK(csv == csv2);

  const char* labels[] = {"a", "b"};
  const dpga_result* results[] = {r.handle, again.handle};
  const auto summary = (dir / "summary.csv").string();
  CHECK(dpga_write_summary(summary.c_str(), labels, results, 2) == DPGA_OK);
  const auto text = slurp(summary);
  CHECK(text.rfind("run,final_eval_acc,up_bytes,down_bytes,total_bytes,sim_time\na,", 0) == 0);
  CHECK(text.find("\nb,") != std::string::npos);

  const auto part = (dir / "partition.csv").string();
  CHECK(dpga_write_partition(c.handle, part.c_str()) == DPGA_OK);
  const auto ptext = slurp(part);
  CHECK(ptext.rfind("index,label,client\n", 0) == 0);
  CHECK(std::count(ptext.begin(), ptext.end(), '\n') == 1 + 48);
  fs::remove_all(dir);
}

TEST_CASE("run-time failures map to status codes") {
  Config c;
  REQUIRE(dpga_config_parse(c.handle, kSmall) == DPGA_OK);
  // A step size near the largest double overflows the weights on round one.
  REQUIRE(dpga_config_set(c.handle, "experiment.eta", "1e307") == DPGA_OK);
  REQUIRE(dpga_config_set(c.handle, "data.spread", "50") == DPGA_OK);
  Result r;
  CHECK(dpga_run(c.handle, &r.handle) == DPGA_ERR_CONTRACT);
  CHECK(r.handle == nullptr);
  CHECK(std::string(dpga_last_error()).find("non-finite") != std::string::npos);

  CHECK(dpga_run(nullptr, &r.handle) == DPGA_ERR_ARGUMENT);
  Config bad;
  REQUIRE(dpga_config_set(bad.handle, "experiment.clients", "0") == DPGA_OK);
  Result none;
  CHECK(dpga_run(bad.handle, &none.handle) == DPGA_ERR_CONFIG);
  CHECK(none.handle == nullptr);
}

TEST_CASE("wire messages") {
  const double z[] = {3, -5, 1, 0};
  Message m;
  REQUIRE(dpga_message_from_dense(z, 4, 0.5, 9, &m.handle) == DPGA_OK);
  CHECK(dpga_message_round(m.handle) == 9);
  CHECK(dpga_message_rate(m.handle) == 0.5);
  REQUIRE(dpga_message_size(m.handle) == 2);
  uint32_t idx = 0;
  double val = 0;
  CHECK(dpga_message_entry(m.handle, 1, &idx, &val) == DPGA_OK);
  CHECK(idx == 1);
  CHECK(val == -5);
  CHECK(dpga_message_entry(m.handle, 2, &idx, &val) == DPGA_ERR_ARGUMENT);

  size_t needed = 0;
  CHECK(dpga_message_encode(m.handle, nullptr, 0, &needed) == DPGA_OK);
  CHECK(needed == dpga_message_bytes(2));
  CHECK(dpga_message_bytes(50) == 617);
  std::vector<uint8_t> bytes(needed);
  CHECK(dpga_message_encode(m.handle, bytes.data(), bytes.size(), &needed) == DPGA_OK);
  CHECK(std::memcmp(bytes.data(), "DPG1", 4) == 0);

  Message back;
  REQUIRE(dpga_message_decode(bytes.data(), bytes.size(), &back.handle) == DPGA_OK);
  CHECK(dpga_message_size(back.handle) == 2);
  CHECK(dpga_message_rate(back.handle) == 0.5);

  bytes[12] = 0;
  Message broken;
  CHECK(dpga_message_decode(bytes.data(), bytes.size(), &broken.handle) == DPGA_ERR_DECODE);
  CHECK(dpga_last_error_position() == 12);
  CHECK(broken.handle == nullptr);

  Message off_grid;
  CHECK(dpga_message_from_dense(z, 4, 0.45, 1, &off_grid.handle) == DPGA_ERR_CONFIG);
  CHECK(dpga_message_from_dense(z, 0, 0.5, 1, &off_grid.handle) == DPGA_ERR_CONTRACT);
}

TEST_CASE("self-checks report every suite") {
  std::vector<std::pair<std::string, int>> seen;
  int all = -1;
  CHECK(dpga_check(0, collect, &seen, &all) == DPGA_OK);
  CHECK(all == 1);
  CHECK(seen.size() == 7);

  seen.clear();
  CHECK(dpga_check(DPGA_CHECK_INJECT_GRADIENT_FAULT, collect, &seen, &all) == DPGA_OK);
  CHECK(all == 0);
  int failed = 0;
  for (const auto& [suite, passed] : seen) failed += passed == 0;
  CHECK(failed == 2);
}

TEST_CASE("plotting metrics files") {
  const auto dir = scratch_dir("plot");
  Config c;
  REQUIRE(dpga_config_parse(c.handle, kSmall) == DPGA_OK);
  Result r;
  REQUIRE(dpga_run(c.handle, &r.handle) == DPGA_OK);
  const auto csv = (dir / "a.csv").string();
  REQUIRE(dpga_result_write_csv(r.handle, csv.c_str()) == DPGA_OK);

  const char* paths[] = {csv.c_str()};
  const char* labels[] = {"dpga"};
  const auto svg = (dir / "out.svg").string();
  CHECK(dpga_plot(paths, labels, 1, "sim_time", svg.c_str()) == DPGA_OK);
  const auto text = slurp(svg);
  CHECK(text.find("<polyline data-label=\"dpga\"") != std::string::npos);

  CHECK(dpga_plot(paths, labels, 1, "loss", svg.c_str()) == DPGA_ERR_CONFIG);
  CHECK(dpga_plot(paths, labels, 0, "round", svg.c_str()) == DPGA_ERR_ARGUMENT);

  const auto bad = (dir / "bad.csv").string();
  std::ofstream(bad) << "round,sim_time,up_bytes,down_bytes,p,train_loss,eval_acc\n"
                     << "1,1,1,1,1,1,1\n2,1,1\n";
  const char* bad_paths[] = {bad.c_str()};
  CHECK(dpga_plot(bad_paths, nullptr, 1, "round", svg.c_str()) == DPGA_ERR_FORMAT);
  CHECK(dpga_last_error_position() == 3);
  CHECK(std::string(dpga_last_error()).find("bad.csv") != std::string::npos);

  const char* missing[] = {"/nonexistent/a.csv"};
  CHECK(dpga_plot(missing, nullptr, 1, "round", svg.c_str()) == DPGA_ERR_IO);
  fs::remove_all(dir);
}

}  // TEST_SUITE

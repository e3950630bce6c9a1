#include <regex>
#include <sstream>

#include "doctest.h"
#include "dpga/errors.hpp"
#include "dpga/report.hpp"

using namespace dpga;

namespace {

std::vector<MetricsRecord> sample_rows() {
  std::vector<MetricsRecord> rows;
  for (std::uint64_t t = 1; t <= 5; ++t) {
    MetricsRecord r;
    r.round = t;
    r.sim_time = 0.1 * static_cast<double>(t) + 1.0 / 3.0;
    r.up_bytes = 617 * t;
    r.down_bytes = 300 * t;
    r.p = 0.1 * static_cast<double>(t);
    r.train_loss = 2.0 / static_cast<double>(t);
    r.eval_acc = 0.2 + 0.15 * static_cast<double>(t);
    rows.push_back(r);
  }
  return rows;
}

std::size_t row_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    read_metrics_csv(in);
  } catch (const FormatError& e) {
    return e.row();
  }
  return 0;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("real formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.0, 123456789.0}) {
    CHECK(std::strtod(format_real(v).c_str(), nullptr) == v);
  }
  CHECK(format_real(0.5) == "0.5");
  CHECK(format_real(0.1) == "0.10000000000000001");
}

TEST_CASE("metrics CSV round-trips byte for byte") {
  const auto rows = sample_rows();
  std::ostringstream out;
  write_metrics_csv(out, rows);
  const auto text = out.str();
  CHECK(text.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  CHECK(count(text, "\n") == 6);

  std::istringstream in(text);
  const auto back = read_metrics_csv(in);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].round == rows[i].round);
    CHECK(back[i].sim_time == rows[i].sim_time);
    CHECK(back[i].up_bytes == rows[i].up_bytes);
    CHECK(back[i].p == rows[i].p);
    CHECK(back[i].eval_acc == rows[i].eval_acc);
  }
  std::ostringstream again;
  write_metrics_csv(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("CSV reader tolerates CRLF and blank lines") {
  const std::string text = std::string(kMetricsHeader) + "\r\n1,1,17,17,1,0.5,0.25\r\n\r\n";
  std::istringstream in(text);
  const auto rows = read_metrics_csv(in);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].eval_acc == 0.25);
}

TEST_CASE("malformed CSV names the row") {
  const std::string h = std::string(kMetricsHeader) + "\n";
  CHECK(row_of("") == 1);
  CHECK(row_of("round,time\n") == 1);
  CHECK(row_of(h + "1,1,17,17,1,0.5,0.25\n2,1,17,17,1,0.5\n") == 3);
  CHECK(row_of(h + "1,1,17,17,1,0.5,0.25,9\n") == 2);
  CHECK(row_of(h + "1,1,17,17,1,0.5,\n") == 2);
  CHECK(row_of(h + "1,1,-17,17,1,0.5,0.25\n") == 2);
  CHECK(row_of(h + "1,1,17,17,1,abc,0.25\n") == 2);
  CHECK(row_of(h + "\n\n1,x,17,17,1,0.5,0.25\n") == 4);
  CHECK(row_of(h + "1,1,17,17,1,0.5,0.25\n") == 0);

  std::istringstream in(h + "oops\n");
  CHECK_THROWS_WITH_AS(read_metrics_csv(in), doctest::Contains("row 2"), FormatError);
}

TEST_CASE("summary uses the last row's cumulative values") {
  const auto rows = sample_rows();
  const auto s = summarize("dpga", rows);
  CHECK(s.label == "dpga");
  CHECK(s.up_bytes == rows.back().up_bytes);
  CHECK(s.down_bytes == rows.back().down_bytes);
  CHECK(s.sim_time == rows.back().sim_time);
  CHECK(s.final_eval_acc == rows.back().eval_acc);

  std::ostringstream out;
  const std::vector<RunSummary> runs{s, summarize("empty", {})};
  write_summary_csv(out, runs);
  CHECK(out.str() == std::string(kSummaryHeader) + "\n" + "dpga," +
                         format_real(rows.back().eval_acc) + ",3085,1500,4585," +
                         format_real(rows.back().sim_time) + "\nempty,0,0,0,0,0\n");
}

TEST_CASE("first record reaching a target") {
  const auto rows = sample_rows();
  CHECK(first_reaching(rows, 0.5)->round == 2);
  CHECK(first_reaching(rows, 0.35)->round == 1);
  CHECK(first_reaching(rows, 0.99) == nullptr);
}

TEST_CASE("plot axes") {
  CHECK(parse_plot_axis("round") == PlotAxis::round);
  CHECK(parse_plot_axis("sim_time") == PlotAxis::sim_time);
  CHECK(parse_plot_axis("up_bytes") == PlotAxis::up_bytes);
  CHECK_THROWS_AS(parse_plot_axis("loss"), ConfigError);
  const auto r = sample_rows()[2];
  CHECK(axis_value(r, PlotAxis::round) == 3.0);
  CHECK(axis_value(r, PlotAxis::up_bytes) == 1851.0);
}

TEST_CASE("plot bounds cover the data") {
  const std::vector<PlotSeries> series{{"a", sample_rows()}};
  const auto b = plot_bounds(series, PlotAxis::round);
  CHECK(b.x_min == 1.0);
  CHECK(b.x_max == 5.0);
  CHECK(b.y_min == sample_rows().front().eval_acc);
  CHECK(b.y_max == sample_rows().back().eval_acc);

  const std::vector<PlotSeries> single{{"one", {sample_rows().front()}}};
  const auto d = plot_bounds(single, PlotAxis::round);
  CHECK(d.x_min == 0.5);
  CHECK(d.x_max == 1.5);
  const auto e = plot_bounds(std::vector<PlotSeries>{}, PlotAxis::round);
  CHECK(e.x_min == 0.0);
  CHECK(e.y_max == 1.0);
}

TEST_CASE("SVG has one polyline per series with every row") {
  auto rows = sample_rows();
  auto other = rows;
  other.pop_back();
  const std::vector<PlotSeries> series{{"fedavg", rows}, {"a<b", other}};
  const auto svg = render_svg(series, PlotAxis::round);

  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count(svg, "<polyline") == 2);
  CHECK(svg.find("data-label=\"a&lt;b\"") != std::string::npos);
  CHECK(count(svg, "class=\"legend\"") == 2);

  const std::regex poly("points=\"([^\"]*)\"");
  std::vector<std::size_t> sizes;
  for (std::sregex_iterator it(svg.begin(), svg.end(), poly), end; it != end; ++it) {
    const auto pts = (*it)[1].str();
    sizes.push_back(count(pts, ","));
  }
  CHECK(sizes == std::vector<std::size_t>{5, 4});

  // First point of the full series sits at the left edge, the last at the
  // right edge and top of the plot area.
  CHECK(svg.find("points=\"70.00,") != std::string::npos);
  CHECK(svg.find("570.00,20.00\"") != std::string::npos);
  CHECK(svg.find("<text class=\"x-max\"") != std::string::npos);
  CHECK(svg.find(">5</text>") != std::string::npos);
}

}  // TEST_SUITE

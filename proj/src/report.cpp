#include "dpga/report.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "dpga/errors.hpp"

namespace dpga {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::uint64_t parse_count(const std::string& s, std::size_t row, const char* column) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError(row, std::string("column ") + column + ": expected an integer, got '" +
                               s + "'");
  }
  errno = 0;
  const auto v = std::strtoull(s.c_str(), nullptr, 10);
  if (errno == ERANGE) throw FormatError(row, std::string("column ") + column + " overflows");
  return v;
}

double parse_number(const std::string& s, std::size_t row, const char* column) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw FormatError(row, std::string("column ") + column + ": expected a number, got '" +
                               s + "'");
  }
  return v;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string_view axis_name(PlotAxis axis) {
  switch (axis) {
    case PlotAxis::round: return "round";
    case PlotAxis::sim_time: return "sim_time";
    case PlotAxis::up_bytes: return "up_bytes";
  }
  return "?";
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.round << ',' << format_real(r.sim_time) << ',' << r.up_bytes << ','
        << r.down_bytes << ',' << format_real(r.p) << ',' << format_real(r.train_loss)
        << ',' << format_real(r.eval_acc) << '\n';
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) {
    throw FormatError(1, "unexpected header '" + line + "'");
  }
  std::vector<MetricsRecord> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 7) {
      throw FormatError(row, "expected 7 fields, found " + std::to_string(f.size()));
    }
    MetricsRecord r;
    r.round = parse_count(f[0], row, "round");
    r.sim_time = parse_number(f[1], row, "sim_time");
    r.up_bytes = parse_count(f[2], row, "up_bytes");
    r.down_bytes = parse_count(f[3], row, "down_bytes");
    r.p = parse_number(f[4], row, "p");
    r.train_loss = parse_number(f[5], row, "train_loss");
    r.eval_acc = parse_number(f[6], row, "eval_acc");
    rows.push_back(r);
  }
  return rows;
}

RunSummary summarize(std::string label, std::span<const MetricsRecord> records) {
  RunSummary s;
  s.label = std::move(label);
  if (!records.empty()) {
    const auto& last = records.back();
    s.final_eval_acc = last.eval_acc;
    s.up_bytes = last.up_bytes;
    s.down_bytes = last.down_bytes;
    s.sim_time = last.sim_time;
  }
  return s;
}

void write_summary_csv(std::ostream& out, std::span<const RunSummary> runs) {
  out << kSummaryHeader << '\n';
  for (const auto& r : runs) {
    out << r.label << ',' << format_real(r.final_eval_acc) << ',' << r.up_bytes << ','
        << r.down_bytes << ',' << (r.up_bytes + r.down_bytes) << ','
        << format_real(r.sim_time) << '\n';
  }
}

const MetricsRecord* first_reaching(std::span<const MetricsRecord> records,
                                    double target) {
  for (const auto& r : records) {
    if (r.eval_acc >= target) return &r;
  }
  return nullptr;
}

PlotAxis parse_plot_axis(std::string_view name) {
  if (name == "round") return PlotAxis::round;
  if (name == "sim_time") return PlotAxis::sim_time;
  if (name == "up_bytes") return PlotAxis::up_bytes;
  throw ConfigError("unknown plot axis '" + std::string(name) +
                    "' (expected round, sim_time or up_bytes)");
}

double axis_value(const MetricsRecord& r, PlotAxis axis) {
  switch (axis) {
    case PlotAxis::round: return static_cast<double>(r.round);
    case PlotAxis::sim_time: return r.sim_time;
    case PlotAxis::up_bytes: return static_cast<double>(r.up_bytes);
  }
  return 0.0;
}

PlotBounds plot_bounds(std::span<const PlotSeries> series, PlotAxis axis) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  PlotBounds b{inf, -inf, inf, -inf};
  for (const auto& s : series) {
    for (const auto& r : s.rows) {
      const double x = axis_value(r, axis);
      b.x_min = std::min(b.x_min, x);
      b.x_max = std::max(b.x_max, x);
      b.y_min = std::min(b.y_min, r.eval_acc);
      b.y_max = std::max(b.y_max, r.eval_acc);
    }
  }
  if (b.x_min > b.x_max) b = {0.0, 1.0, 0.0, 1.0};
  if (b.x_min == b.x_max) {
    b.x_min -= 0.5;
    b.x_max += 0.5;
  }
  if (b.y_min == b.y_max) {
    b.y_min -= 0.5;
    b.y_max += 0.5;
  }
  return b;
}

std::string render_svg(std::span<const PlotSeries> series, PlotAxis axis) {
  constexpr double width = 760, height = 440;
  constexpr double left = 70, right = 190, top = 20, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const auto b = plot_bounds(series, axis);
  auto sx = [&](double x) { return left + (x - b.x_min) / (b.x_max - b.x_min) * plot_w; };
  auto sy = [&](double y) { return top + (b.y_max - y) / (b.y_max - b.y_min) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "<g stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\"/>\n</g>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text class=\"x-min\" x=\"" << left << "\" y=\"" << top + plot_h + 16
      << "\" text-anchor=\"start\">" << format_real(b.x_min) << "</text>\n";
  svg << "<text class=\"x-max\" x=\"" << left + plot_w << "\" y=\"" << top + plot_h + 16
      << "\" text-anchor=\"end\">" << format_real(b.x_max) << "</text>\n";
  svg << "<text class=\"y-min\" x=\"" << left - 6 << "\" y=\"" << top + plot_h
      << "\" text-anchor=\"end\">" << format_real(b.y_min) << "</text>\n";
  svg << "<text class=\"y-max\" x=\"" << left - 6 << "\" y=\"" << top + 10
      << "\" text-anchor=\"end\">" << format_real(b.y_max) << "</text>\n";
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << axis_name(axis) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 16 "
      << top + plot_h / 2 << ")\" text-anchor=\"middle\">eval_acc</text>\n";
  svg << "</g>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<polyline data-label=\"" << xml_escape(series[k].label)
        << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[k].rows.size(); ++i) {
      const auto& r = series[k].rows[i];
      svg << (i ? " " : "") << fixed(sx(axis_value(r, axis))) << ',' << fixed(sy(r.eval_acc));
    }
    svg << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(k);
    svg << "<line x1=\"" << left + plot_w + 16 << "\" y1=\"" << ly - 4 << "\" x2=\""
        << left + plot_w + 36 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text class=\"legend\" x=\"" << left + plot_w + 42 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(series[k].label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace dpga

#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpga/sim.hpp"

namespace dpga {

inline constexpr std::string_view kMetricsHeader =
    "round,sim_time,up_bytes,down_bytes,p,train_loss,eval_acc";
inline constexpr std::string_view kSummaryHeader =
    "run,final_eval_acc,up_bytes,down_bytes,total_bytes,sim_time";

/// Fixed 17-significant-digit rendering so files are byte-stable.
std::string format_real(double v);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records);

/// Throws FormatError naming the 1-based row (header = row 1).
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

struct RunSummary {
  std::string label;
  double final_eval_acc = 0.0;
  std::uint64_t up_bytes = 0;
  std::uint64_t down_bytes = 0;
  double sim_time = 0.0;
};

/// Totals are the last row's cumulative values.
RunSummary summarize(std::string label, std::span<const MetricsRecord> records);
void write_summary_csv(std::ostream& out, std::span<const RunSummary> runs);

/// First record whose eval_acc reaches target, or nullptr.
const MetricsRecord* first_reaching(std::span<const MetricsRecord> records, double target);

enum class PlotAxis { round, sim_time, up_bytes };
/// Throws ConfigError for names other than round, sim_time, up_bytes.
PlotAxis parse_plot_axis(std::string_view name);
double axis_value(const MetricsRecord& r, PlotAxis axis);

struct PlotSeries {
  std::string label;
  std::vector<MetricsRecord> rows;
};

struct PlotBounds {
  double x_min, x_max, y_min, y_max;
};

/// Data extent over all series; degenerate ranges are widened by 0.5.
PlotBounds plot_bounds(std::span<const PlotSeries> series, PlotAxis axis);

/// Static SVG: one polyline per series, eval_acc against the chosen axis.
std::string render_svg(std::span<const PlotSeries> series, PlotAxis axis);

}  // namespace dpga

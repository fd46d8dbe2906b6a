#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ctedd {

struct MetricsRow {
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;
  std::string variant;
  double mean_return = 0.0;
  double ci95 = 0.0;  // NaN when undefined
  double wallclock_s = 0.0;
};

inline constexpr const char* kMetricsHeader = "env_steps,episodes,variant,mean_return,ci95,wallclock_s";

std::string format_metrics_row(const MetricsRow& row);
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
// Throws InputError "<source>:<line>: reason" on the first bad row.
std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& source);

struct PlotSeries {
  std::string label;
  std::vector<MetricsRow> rows;
};

struct PlotOptions {
  int width = 800;
  int height = 480;
  std::string title = "evaluation return";
};

// Line chart of mean_return against env_steps with a shaded mean +/- ci95
// band per series and a legend. Output depends only on the inputs.
std::string render_svg(std::span<const PlotSeries> series, const PlotOptions& options = {});

}  // namespace ctedd

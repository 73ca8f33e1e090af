#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ecac/metrics.hpp"

namespace ecac {

struct ChartPoint {
  double x = 0.0;
  double y = 0.0;
};

struct ChartSeries {
  std::string label;
  std::vector<ChartPoint> points;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  // The x axis always spans [0, x_max].
  double x_max = 1.0;
  std::vector<ChartSeries> series;
};

std::string to_svg(const LineChart& chart);

struct LabeledMetrics {
  std::string label;
  std::vector<MetricsRecord> rows;
};

// One series per input; rows lacking the column are skipped. x_max is the
// largest step seen across all inputs.
LineChart metric_chart(const std::vector<LabeledMetrics>& inputs, const std::string& event, Col column,
                       const std::string& title, const std::string& y_label, const std::string& probe_type = "");

// Writes return.svg (eval mean), kl.svg (consecutive-policy KL) and eq.svg
// (median normalized Q error) into out_dir. Series are labeled by file name,
// or by parent directory when file names collide.
std::vector<std::filesystem::path> render_charts(const std::vector<std::filesystem::path>& metrics_files,
                                                 const std::filesystem::path& out_dir);

}  // namespace ecac

#include "ecac/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "ecac/errors.hpp"

namespace ecac {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 80, kRight = 160, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string escape(const std::string& s) {
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

}  // namespace

std::string to_svg(const LineChart& chart) {
  const double x_max = chart.x_max > 0 ? chart.x_max : 1.0;
  double y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : chart.series) {
    for (const auto& p : s.points) {
      y_lo = std::min(y_lo, p.y);
      y_hi = std::max(y_hi, p.y);
    }
  }
  if (!std::isfinite(y_lo)) y_lo = 0, y_hi = 1;
  if (y_hi - y_lo < 1e-12) y_lo -= 0.5, y_hi += 0.5;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + pw * x / x_max; };
  auto py = [&](double y) { return kTop + ph * (1.0 - (y - y_lo) / (y_hi - y_lo)); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                    num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(chart.title) + "</text>\n";
  svg += "<g class=\"x-axis\" data-min=\"0\" data-max=\"" + num(x_max) + "\">\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
         num(kTop + ph) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double x = x_max * i / 5.0;
    svg += "<text x=\"" + num(px(x)) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" + num(x) +
           "</text>\n";
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 15) + "\" text-anchor=\"middle\">" +
         escape(chart.x_label) + "</text>\n</g>\n";
  svg += "<g class=\"y-axis\" data-min=\"" + num(y_lo) + "\" data-max=\"" + num(y_hi) + "\">\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kTop + ph) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = y_lo + (y_hi - y_lo) * i / 4.0;
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(y) + 4) + "\" text-anchor=\"end\">" + num(y) +
           "</text>\n";
  }
  svg += "<text transform=\"translate(18," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(chart.y_label) + "</text>\n</g>\n";

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    svg += "<polyline class=\"series\" data-label=\"" + escape(s.label) + "\" data-points=\"" +
           std::to_string(s.points.size()) + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : s.points) svg += num(px(p.x)) + "," + num(py(p.y)) + " ";
    svg += "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    svg += "<line x1=\"" + num(kLeft + pw + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(kLeft + pw + 32) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text class=\"legend\" x=\"" + num(kLeft + pw + 38) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.label) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

LineChart metric_chart(const std::vector<LabeledMetrics>& inputs, const std::string& event, Col column,
                       const std::string& title, const std::string& y_label, const std::string& probe_type) {
  LineChart chart{title, "environment steps", y_label, 0.0, {}};
  for (const auto& in : inputs) {
    ChartSeries s{in.label, {}};
    for (const auto& r : in.rows) {
      chart.x_max = std::max(chart.x_max, static_cast<double>(r.step));
      if (r.event != event || (!probe_type.empty() && r.probe_type != probe_type)) continue;
      if (const auto& v = r[column]) s.points.push_back({static_cast<double>(r.step), *v});
    }
    chart.series.push_back(std::move(s));
  }
  return chart;
}

std::vector<fs::path> render_charts(const std::vector<fs::path>& metrics_files, const fs::path& out_dir) {
  if (metrics_files.empty()) throw ConfigError("render-charts needs at least one metrics file");
  std::vector<LabeledMetrics> inputs;
  std::set<std::string> names;
  bool collide = false;
  for (const auto& f : metrics_files) collide |= !names.insert(f.filename().string()).second;
  for (const auto& f : metrics_files) {
    std::string label = collide ? f.parent_path().filename().string() : f.stem().string();
    if (label.empty()) label = f.string();
    inputs.push_back({label, read_metrics(f)});
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const std::vector<std::pair<std::string, LineChart>> charts = {
      {"return.svg", metric_chart(inputs, "eval", Col::kEvalMean, "Evaluation return", "mean return")},
      {"kl.svg", metric_chart(inputs, "train", Col::kKl, "Consecutive-policy KL", "mean KL (nats)")},
      {"eq.svg", metric_chart(inputs, "probe", Col::kEqMedian, "Normalized Q error", "median e_Q", "eq")},
  };
  std::vector<fs::path> written;
  for (const auto& [name, chart] : charts) {
    const auto path = out_dir / name;
    std::ofstream out(path, std::ios::trunc);
    out << to_svg(chart);
    if (!out) throw IoError("cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace ecac

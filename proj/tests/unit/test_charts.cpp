#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "ecac/charts.hpp"
#include "ecac/errors.hpp"
#include "ecac/metrics.hpp"

using namespace ecac;
namespace fs = std::filesystem;

namespace {

MetricsRecord row(std::string event, std::uint64_t step, std::string probe_type = "") {
  MetricsRecord r;
  r.event = std::move(event);
  r.step = step;
  r.probe_type = std::move(probe_type);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> all(const std::string& text, const std::string& pattern) {
  std::vector<std::string> out;
  const std::regex re(pattern);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1]);
  }
  return out;
}

fs::path write_metrics(const fs::path& path, const std::vector<MetricsRecord>& rows) {
  fs::create_directories(path.parent_path());
  MetricsWriter w(path);
  for (const auto& r : rows) w.write(r);
  return path;
}

std::vector<MetricsRecord> run_rows(double offset) {
  std::vector<MetricsRecord> rows;
  for (std::uint64_t s = 1000; s <= 5000; s += 1000) {
    auto e = row("eval", s);
    e[Col::kEvalMean] = offset + static_cast<double>(s) / 1000.0;
    rows.push_back(e);
    auto t = row("train", s);
    t[Col::kKl] = 0.01 * static_cast<double>(s) / 1000.0;
    rows.push_back(t);
    auto p = row("probe", s, "eq");
    if (s != 3000) p[Col::kEqMedian] = 0.5;  // probe at 3000 left empty
    rows.push_back(p);
  }
  rows.push_back(row("episode", 6000));
  return rows;
}

}  // namespace

TEST_CASE("missing probe values are skipped, not plotted as zero") {
  const auto chart = metric_chart({{"run", run_rows(0)}}, "probe", Col::kEqMedian, "e", "e", "eq");
  REQUIRE(chart.series.size() == 1);
  const auto& pts = chart.series[0].points;
  REQUIRE(pts.size() == 4);
  for (const auto& p : pts) CHECK(p.x != 3000.0);
}

TEST_CASE("the x axis spans exactly zero to the last step") {
  const auto chart = metric_chart({{"run", run_rows(0)}}, "eval", Col::kEvalMean, "r", "r");
  CHECK(chart.x_max == 6000.0);
  const auto svg = to_svg(chart);
  CHECK(svg.find("class=\"x-axis\" data-min=\"0\" data-max=\"6000\"") != std::string::npos);
}

TEST_CASE("two metrics files give two labeled series per chart") {
  const auto dir = fs::temp_directory_path() / "ecac_unit_charts";
  fs::remove_all(dir);
  const auto a = write_metrics(dir / "kl_on" / "metrics.csv", run_rows(0));
  const auto b = write_metrics(dir / "kl_off" / "metrics.csv", run_rows(10));
  const auto written = render_charts({a, b}, dir / "charts");
  REQUIRE(written.size() == 3);
  for (const auto& f : written) {
    CAPTURE(f);
    const auto svg = slurp(f);
    CHECK(svg.rfind("<svg", 0) == 0);
    const auto labels = all(svg, "class=\"series\" data-label=\"([^\"]*)\"");
    CHECK(labels == std::vector<std::string>{"kl_on", "kl_off"});
  }
  const auto eq = slurp(dir / "charts" / "eq.svg");
  CHECK(all(eq, "data-points=\"([0-9]+)\"") == std::vector<std::string>{"4", "4"});
  const auto ret = slurp(dir / "charts" / "return.svg");
  CHECK(all(ret, "data-points=\"([0-9]+)\"") == std::vector<std::string>{"5", "5"});

  // Distinct file names label by stem.
  const auto c = write_metrics(dir / "one.csv", run_rows(0));
  const auto d = write_metrics(dir / "two.csv", run_rows(1));
  render_charts({c, d}, dir / "charts2");
  CHECK(all(slurp(dir / "charts2" / "kl.svg"), "data-label=\"([^\"]*)\"") == std::vector<std::string>{"one", "two"});
}

TEST_CASE("malformed input is reported with its line number") {
  const auto dir = fs::temp_directory_path() / "ecac_unit_charts_bad";
  fs::remove_all(dir);
  const auto p = write_metrics(dir / "metrics.csv", run_rows(0));
  {
    std::ofstream out(p, std::ios::app);
    out << "eval,x\n";
  }
  try {
    render_charts({p}, dir / "out");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 18") != std::string::npos);
  }
  CHECK_THROWS_AS(render_charts({}, dir / "out"), ConfigError);
}

#include "ecac/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "ecac/errors.hpp"

namespace ecac {

namespace {

constexpr std::array<std::string_view, kNumericColumns> kNames = {
    "episode",      "episode_return", "episode_length",  "goal_distance", "eval_mean",     "eval_min",
    "eval_max",     "eval_std",       "eval_goal_distance", "critic_loss1", "critic_loss2", "actor_objective",
    "kl",           "entropy",        "cross_entropy",   "alpha",         "beta",          "eq_median",
    "eq_mean",      "eq_excluded",    "source_error",    "source_error_se", "target_shift", "target_shift_se",
    "policy_shift", "policy_shift_se",
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

[[noreturn]] void fail(std::size_t line_number, const std::string& what) {
  throw IoError("metrics line " + std::to_string(line_number) + ": " + what);
}

}  // namespace

const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> header = [] {
    std::vector<std::string> h{"event", "step", "probe_type"};
    for (auto n : kNames) h.emplace_back(n);
    return h;
  }();
  return header;
}

std::string_view column_name(Col c) { return kNames[static_cast<std::size_t>(c)]; }

std::string format_metrics_row(const MetricsRecord& r) {
  std::string line = r.event + "," + std::to_string(r.step) + "," + r.probe_type;
  char buf[32];
  for (const auto& v : r.values) {
    line += ',';
    if (v) {
      std::snprintf(buf, sizeof buf, "%.17g", *v);
      line += buf;
    }
  }
  return line;
}

MetricsRecord parse_metrics_row(const std::string& line, std::size_t line_number) {
  const auto fields = split(line);
  if (fields.size() != metrics_header().size()) {
    fail(line_number, "expected " + std::to_string(metrics_header().size()) + " fields, found " +
                          std::to_string(fields.size()));
  }
  MetricsRecord r;
  r.event = std::string(fields[0]);
  if (r.event.empty()) fail(line_number, "empty event");
  {
    const auto f = fields[1];
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), r.step);
    if (ec != std::errc{} || ptr != f.data() + f.size()) fail(line_number, "bad step '" + std::string(f) + "'");
  }
  r.probe_type = std::string(fields[2]);
  for (std::size_t i = 0; i < kNumericColumns; ++i) {
    const auto f = fields[i + 3];
    if (f.empty()) continue;
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
    if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(x)) {
      fail(line_number, "bad value '" + std::string(f) + "' in column " + std::string(kNames[i]));
    }
    r.values[i] = x;
  }
  return r;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::trunc) {
  if (!out_) throw IoError("cannot write metrics file " + path.string());
  const auto& h = metrics_header();
  for (std::size_t i = 0; i < h.size(); ++i) out_ << (i ? "," : "") << h[i];
  out_ << '\n';
}

void MetricsWriter::write(const MetricsRecord& r) {
  out_ << format_metrics_row(r) << '\n';
  if (!out_) throw IoError("write failed on " + path_.string());
}

void MetricsWriter::flush() {
  out_.flush();
  if (!out_) throw IoError("write failed on " + path_.string());
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("metrics line 1: missing header");
  {
    const auto fields = split(line);
    const auto& h = metrics_header();
    bool ok = fields.size() == h.size();
    for (std::size_t i = 0; ok && i < h.size(); ++i) ok = fields[i] == h[i];
    if (!ok) fail(1, "header does not match the expected columns");
  }
  std::vector<MetricsRecord> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_metrics_row(line, number));
  }
  return rows;
}

}  // namespace ecac

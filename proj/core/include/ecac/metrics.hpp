#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecac {

// Numeric metric columns, in file order after "event,step,probe_type".
enum class Col : std::size_t {
  kEpisode,
  kEpisodeReturn,  // raw, unscaled
  kEpisodeLength,
  kGoalDistance,
  kEvalMean,
  kEvalMin,
  kEvalMax,
  kEvalStd,
  kEvalGoalDistance,
  kCriticLoss1,
  kCriticLoss2,
  kActorObjective,
  kKl,
  kEntropy,
  kCrossEntropy,
  kAlpha,
  kBeta,
  kEqMedian,
  kEqMean,
  kEqExcluded,
  kSourceError,
  kSourceErrorSe,
  kTargetShift,
  kTargetShiftSe,
  kPolicyShift,
  kPolicyShiftSe,
  kCount,
};

inline constexpr std::size_t kNumericColumns = static_cast<std::size_t>(Col::kCount);

// Events: "episode", "train", "eval", "probe". Probe rows carry probe_type "eq",
// "bounds", or "skipped". Absent values are written as empty fields.
struct MetricsRecord {
  std::string event;
  std::uint64_t step = 0;
  std::string probe_type;
  std::array<std::optional<double>, kNumericColumns> values{};

  std::optional<double>& operator[](Col c) { return values[static_cast<std::size_t>(c)]; }
  const std::optional<double>& operator[](Col c) const { return values[static_cast<std::size_t>(c)]; }

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

const std::vector<std::string>& metrics_header();
std::string_view column_name(Col c);

// Numbers use 17 significant digits, so a write/read round trip is exact.
std::string format_metrics_row(const MetricsRecord& r);
MetricsRecord parse_metrics_row(const std::string& line, std::size_t line_number);

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRecord& r);
  void flush();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Throws IoError naming the line of the first malformed row.
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

}  // namespace ecac

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "kamamsr/backtest.hpp"
#include "kamamsr/calibrate.hpp"
#include "kamamsr/market_data.hpp"
#include "kamamsr/msr.hpp"
#include "kamamsr/pipeline.hpp"

namespace kamamsr::report {

// Shortest round-trip text for a double; NaN and infinities become "".
std::string num(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);

// Rewrites <dir>/manifest.json from the directory's current files.
void write_manifest(const std::filesystem::path& dir, const std::string& asset_id);

// Probability rows start at price day first_day.
std::string probabilities_csv(const ProbMatrix& probs, std::span<const Date> dates,
                              std::size_t first_day = 2);
std::string kama_csv(const KamaSeries& s, std::span<const TrendSignal> signals,
                     std::span<const Date> dates);
std::string labels_csv(std::span<const RegimeLabel> labels, std::span<const Date> dates);
std::string segments_csv(std::span<const Segment> segments, std::span<const Date> dates);

nlohmann::json metrics_json(const BacktestResult& r, std::span<const Date> return_dates,
                            std::size_t offset);
nlohmann::json backtest_json(const BacktestOutcome& b, const PreparedAsset& asset,
                             const RunConfig& cfg);
std::string equity_csv(const BacktestOutcome& b, const PreparedAsset& asset);
std::string positions_csv(const BacktestOutcome& b, const PreparedAsset& asset);
std::string track_labels_csv(const BacktestOutcome& b, const PreparedAsset& asset);

nlohmann::json comparison_json(std::span<const AssetComparison> assets,
                               std::span<const ClassSummary> classes);
std::string comparison_csv(std::span<const AssetComparison> assets,
                           std::span<const ClassSummary> classes);

}  // namespace kamamsr::report

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "kamamsr/backtest.hpp"
#include "kamamsr/calibrate.hpp"
#include "kamamsr/kama.hpp"
#include "kamamsr/market_data.hpp"
#include "kamamsr/msr.hpp"
#include "kamamsr/regime.hpp"
#include "kamamsr/synth.hpp"

namespace kamamsr {

struct AssetSpec {
  std::string id;
  std::filesystem::path path;
  AssetClass asset_class = AssetClass::Equities;
};

struct BacktestConfig {
  int n_weight_draws = 1000;
  std::uint64_t seed = 0;
  BearMode bear_mode = BearMode::Short;
  SelectBy select_by = SelectBy::Asr;
};

struct SynthConfig {
  std::size_t length = 3000;
  TrendScenario trend;
};

// Module seeds default to derive_seed(seed, module) unless set explicitly.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::vector<AssetSpec> assets;

  double train_fraction = kDefaultTrainFraction;
  double cash_annual_rate = 0.0;
  std::size_t min_series_length = 260;
  std::optional<std::filesystem::path> cash_path;

  EmConfig msr;
  KamaParams kama;
  SearchConfig calibrate;
  BacktestConfig backtest;
  CostSchedule costs = CostSchedule::defaults();
  SynthConfig synth;

  // Relative paths resolve against base_dir. Throws ConfigError.
  static RunConfig from_json(const nlohmann::json& j,
                             const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  // Replaces the global seed and every module seed not set explicitly.
  void set_seed(std::uint64_t s);
  nlohmann::json to_json() const;

  const AssetSpec& asset(std::string_view id) const;

 private:
  bool msr_seed_set_ = false;
  bool calibrate_seed_set_ = false;
  bool backtest_seed_set_ = false;
};

struct PreparedAsset {
  PriceSeries prices;
  PriceSeries cash;
  DataSplit split;
  // Return day j runs from price day j to j + 1.
  std::vector<double> asset_log;
  std::vector<double> cash_log;

  std::size_t train_return_days() const { return split.train_end_index - 1; }
};

PreparedAsset prepare_asset(PriceSeries prices, const RunConfig& cfg);
PreparedAsset load_asset(const AssetSpec& spec, const RunConfig& cfg);

// Fits on the training partition's returns only.
MsrFit fit_training_msr(const PreparedAsset& asset, int k, const EmConfig& cfg,
                        Execution exec = Execution::Parallel);

struct CalibrationOutcome {
  MsrFit msr;
  std::vector<double> p_low;  // smoothed, per training price day
  SearchResult search;
};

CalibrationOutcome calibrate_asset(const PreparedAsset& asset, const RunConfig& cfg,
                                   Execution exec = Execution::Parallel);

// Causal per-day decision track under frozen parameters: filtered
// probabilities, labels or reduced states, and activity per price day.
struct TradingTrack {
  std::vector<double> p_low;
  std::vector<RegimeLabel> labels;  // KamaMsr
  std::vector<int> states;          // benchmarks: 0 low, 1 high, -1 undefined
  std::vector<int> activity;        // +1 long, -1 bear-active, 0 cash
  std::vector<int> regime_code;     // run key for per-segment scoring
  KamaSeries kama;
  std::vector<TrendSignal> signals;
};

TradingTrack trading_track(std::span<const double> closes, ModelId model, const MsrParams& msr,
                           const KamaParams* kama = nullptr);

// Weight held over each return day (target set at the previous close).
std::vector<double> return_day_weights(const TradingTrack& track, const StrategyPolicy& policy);

struct BacktestOutcome {
  ModelId model = ModelId::KamaMsr;
  MsrFit msr;
  std::optional<KamaParams> kama;
  TradingTrack track;
  WeightSearch search;
  std::vector<double> weights;  // per return day, whole series
  BacktestResult train;
  BacktestResult test;
  std::size_t test_begin = 0;  // first test return day
};

// KamaMsr requires calibrated params. Throws ConfigError on an empty test
// partition.
BacktestOutcome backtest_asset(const PreparedAsset& asset, ModelId model, const RunConfig& cfg,
                               const std::optional<KamaParams>& calibrated,
                               Execution exec = Execution::Parallel);

// Share of defined labelled days that match the planted labels.
double label_agreement(std::span<const RegimeLabel> labels, std::span<const RegimeLabel> planted);

}  // namespace kamamsr

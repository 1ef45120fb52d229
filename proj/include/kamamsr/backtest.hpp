#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "kamamsr/market_data.hpp"
#include "kamamsr/parallel.hpp"
#include "kamamsr/regime.hpp"

namespace kamamsr {

// Percent of traded notional, two-way (buy + sell).
struct ClassCosts {
  double brokerage_pct = 0.0;
  double spread_pct = 0.0;
  double impact_pct = 0.0;

  double total_pct() const { return brokerage_pct + spread_pct + impact_pct; }
  // Charged per side, i.e. per unit of absolute weight change.
  double per_side_fraction() const { return total_pct() / 2.0 / 100.0; }
};

class CostSchedule {
 public:
  // Equities 0.14/0.13/0.53, Currencies 0/0.13/0, Commodities 0.14/0.13/0,
  // FixedIncome 0.14/0.13/0.53, Cash free.
  static CostSchedule defaults();

  const ClassCosts& operator[](AssetClass c) const;
  ClassCosts& operator[](AssetClass c);

 private:
  std::array<ClassCosts, 5> by_class_{};
};

enum class ModelId { KamaMsr, Msr2S, Msr3Sto2S };
inline constexpr std::array<ModelId, 3> kAllModels{ModelId::Msr2S, ModelId::Msr3Sto2S,
                                                   ModelId::KamaMsr};

std::string_view to_string(ModelId m);
ModelId model_id_from_string(std::string_view s);

// Short: hold -w_bear asset and 1 - w_bear cash in the bearish active
// regime. Cash: stay parked instead.
enum class BearMode { Short, Cash };
std::string_view to_string(BearMode m);
BearMode bear_mode_from_string(std::string_view s);

enum class SelectBy { Asr, Returns };
std::string_view to_string(SelectBy s);
SelectBy select_by_from_string(std::string_view s);

struct StrategyPolicy {
  ModelId model = ModelId::KamaMsr;
  double w_bull = 1.0;
  double w_bear = 1.0;
  BearMode bear_mode = BearMode::Short;
};

// +1 bullish-active, -1 bearish-active, 0 parked in cash.
std::vector<int> activity_from_labels(std::span<const RegimeLabel> labels);
// States 0 = low variance (long), 1 = high variance (cash), -1 undefined.
std::vector<int> activity_from_states(std::span<const int> states);

std::vector<double> target_weights(std::span<const int> activity, const StrategyPolicy& policy);

// Position held over price day t is the target computed at the close of
// day t - 1; day 0 starts in cash.
std::vector<double> lag_positions(std::span<const double> targets);
std::vector<double> positions_from_labels(std::span<const RegimeLabel> labels,
                                          const StrategyPolicy& policy);
std::vector<double> positions_from_states(std::span<const int> states,
                                          const StrategyPolicy& policy);

struct SegmentMetrics {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive, in return-day indices
  std::size_t n_days = 0;
  double annual_return = 0.0;
};

struct DayRange {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::size_t n_days() const { return end - start + 1; }
};

// Maximal runs of equal codes.
std::vector<DayRange> runs(std::span<const int> codes);
std::vector<DayRange> day_ranges(std::span<const Segment> segments);

struct AsrResult {
  std::optional<double> value;  // empty when sigma is zero or < 2 returns
  double mar = 0.0;             // annualized mean
  double sigma = 0.0;           // annualized sample std
  std::optional<double> mar_plus;
  bool no_positive_returns = false;  // fell back to MAR / sigma
};

struct BacktestResult {
  std::vector<double> daily_returns;  // log, net of costs
  std::vector<double> daily_costs;    // fraction charged each day
  double turnover = 0.0;
  double cost_drag = 0.0;
  double weighted_annual_return = 0.0;
  double whole_period_annual_return = 0.0;
  AsrResult asr;
  std::vector<SegmentMetrics> per_segment;
};

// r_p = w (e^{r_a} - 1) + (1 - |w|)(e^{r_c} - 1) - |w - w_prev| * per-side cost,
// returned as log. initial_weight is the position before the first day.
BacktestResult portfolio_returns(std::span<const double> asset_log,
                                 std::span<const double> cash_log,
                                 std::span<const double> weights, const ClassCosts& costs,
                                 double initial_weight = 0.0);
BacktestResult portfolio_returns(std::span<const double> asset_log,
                                 std::span<const double> cash_log,
                                 std::span<const double> weights, const CostSchedule& costs,
                                 AssetClass asset_class, double initial_weight = 0.0);

// Day-count weighted mean of per-range (mean daily return * 252). Throws
// std::invalid_argument when the ranges cover no days.
double weighted_annual_return(std::span<const double> daily_returns,
                              std::span<const DayRange> ranges);
std::vector<SegmentMetrics> segment_metrics(std::span<const double> daily_returns,
                                            std::span<const DayRange> ranges);

AsrResult adjusted_sharpe(std::span<const double> daily_returns);
// MAR * sigma^(-MAR / MAR+), i.e. MAR / sigma^(MAR / MAR+)
double adjusted_sharpe_closed_form(double mar, double mar_plus, double sigma);

// Fills weighted_annual_return, whole-period return, ASR and the
// per-segment table.
void score(BacktestResult& result, std::span<const DayRange> ranges);

struct WeightDraw {
  int draw = 0;
  double w_bull = 0.0;
  double w_bear = 0.0;
  std::optional<double> asr;
  double annual_return = 0.0;
};

struct OptimizeConfig {
  int n_draws = 1000;
  std::uint64_t seed = 0;
  SelectBy select_by = SelectBy::Asr;
};

struct WeightSearch {
  StrategyPolicy policy;
  int best_draw = 0;
  bool fell_back_to_returns = false;
  std::vector<WeightDraw> draws;
};

std::pair<double, double> draw_weights(std::uint64_t seed, int draw);

// activity is aligned to the return days (already lagged). The draw
// sequence depends only on the seed, so every model sees the same draws.
WeightSearch optimize_weights(std::span<const double> asset_log, std::span<const double> cash_log,
                              std::span<const int> activity, std::span<const DayRange> ranges,
                              const StrategyPolicy& skeleton, const ClassCosts& costs,
                              const OptimizeConfig& cfg, Execution exec = Execution::Parallel);

struct WinningScore {
  int winner = -1;
  double ws = 0.0;
};

// NaN scores are treated as missing. WS = (best - runner_up) / best when
// best > 0, otherwise 0; exact ties give 0.
WinningScore winning_score(std::span<const double> scores);

double combined_score(double ws_returns, double ws_asr);

struct AssetComparison {
  std::string asset_id;
  AssetClass asset_class = AssetClass::Equities;
  // indexed by kAllModels order
  std::array<double, 3> annual_returns{};
  std::array<double, 3> asr{};  // NaN when undefined
  WinningScore ws_returns;
  WinningScore ws_asr;
  std::array<double, 3> attributed_returns{};
  std::array<double, 3> attributed_asr{};
  std::array<double, 3> combined{};
};

AssetComparison compare_asset(std::string asset_id, AssetClass asset_class,
                              const std::array<double, 3>& annual_returns,
                              const std::array<double, 3>& asr);

struct ClassSummary {
  AssetClass asset_class = AssetClass::Equities;
  int n_assets = 0;
  std::array<double, 3> asr_ws{};
  std::array<double, 3> returns_ws{};
  std::array<double, 3> combined{};
};

std::vector<ClassSummary> aggregate_by_class(std::span<const AssetComparison> assets);

nlohmann::json to_json(const CostSchedule& c);
CostSchedule cost_schedule_from_json(const nlohmann::json& j, CostSchedule base = CostSchedule::defaults());

}  // namespace kamamsr

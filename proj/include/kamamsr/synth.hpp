#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "kamamsr/market_data.hpp"
#include "kamamsr/msr.hpp"
#include "kamamsr/regime.hpp"

namespace kamamsr {

enum class Scenario { TwoState, ThreeState, TrendRegimes };
std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view s);

struct SyntheticAsset {
  PriceSeries prices;                // T + 1 closes starting at 100
  std::vector<int> states;           // per return day (price day t + 1)
  std::vector<RegimeLabel> planted;  // per price day; Undefined on day 0 and outside trend_regimes
};

// mu = (0.0005, -0.001), sigma = (0.005, 0.02), p = q = 0.98
MsrParams two_state_truth();
// sigma = (0.004, 0.01, 0.025), diagonal 0.98
MsrParams three_state_truth();

// Bull/bear drift episodes cycling LowVarBull -> HighVarBull -> HighVarBear
// -> LowVarBear, so each switch changes either volatility or trend.
struct TrendScenario {
  double low_sigma = 0.005;
  double high_sigma = 0.02;
  double low_drift = 0.002;
  double high_drift = 0.006;
  int min_episode = 200;
  int max_episode = 350;
};

SyntheticAsset synthesize(Scenario scenario, std::size_t T, std::uint64_t seed,
                          const TrendScenario& trend = {});

}  // namespace kamamsr

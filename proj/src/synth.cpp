#include "kamamsr/synth.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace kamamsr {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::TwoState: return "two_state";
    case Scenario::ThreeState: return "three_state";
    case Scenario::TrendRegimes: return "trend_regimes";
  }
  return "?";
}

Scenario scenario_from_string(std::string_view s) {
  for (Scenario sc : {Scenario::TwoState, Scenario::ThreeState, Scenario::TrendRegimes})
    if (to_string(sc) == s) return sc;
  throw std::invalid_argument("unknown scenario: " + std::string(s));
}

MsrParams two_state_truth() {
  MsrParams p;
  p.k = 2;
  p.mu = Eigen::Vector2d(0.0005, -0.001);
  p.beta = Eigen::Vector2d(0.0, 0.0);
  p.sigma = Eigen::Vector2d(0.005, 0.02);
  p.transition.resize(2, 2);
  p.transition << 0.98, 0.02, 0.02, 0.98;
  p.delta = Eigen::Vector2d(0.5, 0.5);
  return p;
}

MsrParams three_state_truth() {
  MsrParams p;
  p.k = 3;
  p.mu = Eigen::Vector3d(0.0006, 0.0, -0.0015);
  p.beta = Eigen::Vector3d(0.0, 0.0, 0.0);
  p.sigma = Eigen::Vector3d(0.004, 0.01, 0.025);
  p.transition.resize(3, 3);
  p.transition << 0.98, 0.01, 0.01, 0.01, 0.98, 0.01, 0.01, 0.01, 0.98;
  p.delta = Eigen::Vector3d::Constant(1.0 / 3.0);
  return p;
}

namespace {

SyntheticAsset trend_regimes(std::size_t T, std::uint64_t seed, const TrendScenario& sc) {
  static constexpr RegimeLabel kCycle[] = {RegimeLabel::LowVarBull, RegimeLabel::HighVarBull,
                                           RegimeLabel::HighVarBear, RegimeLabel::LowVarBear};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> len(sc.min_episode, sc.max_episode);

  SyntheticAsset a;
  a.states.resize(T);
  a.planted.assign(T + 1, RegimeLabel::Undefined);
  std::vector<double> r(T);
  std::size_t phase = 0;
  int left = len(rng);
  for (std::size_t t = 0; t < T; ++t) {
    if (left == 0) {
      phase = (phase + 1) % 4;
      left = len(rng);
    }
    --left;
    const RegimeLabel l = kCycle[phase];
    const bool low = l == RegimeLabel::LowVarBull || l == RegimeLabel::LowVarBear;
    const bool bull = l == RegimeLabel::LowVarBull || l == RegimeLabel::HighVarBull;
    const double sigma = low ? sc.low_sigma : sc.high_sigma;
    const double drift = (low ? sc.low_drift : sc.high_drift) * (bull ? 1.0 : -1.0);
    r[t] = drift + sigma * z(rng);
    a.states[t] = low ? 0 : 1;
    a.planted[t + 1] = l;
  }
  a.prices.closes.resize(T + 1);
  a.prices.closes[0] = 100.0;
  for (std::size_t t = 0; t < T; ++t) a.prices.closes[t + 1] = a.prices.closes[t] * std::exp(r[t]);
  return a;
}

}  // namespace

SyntheticAsset synthesize(Scenario scenario, std::size_t T, std::uint64_t seed,
                          const TrendScenario& trend) {
  if (T < 2) throw std::invalid_argument("synthesize: length must be >= 2");
  SyntheticAsset a;
  if (scenario == Scenario::TrendRegimes) {
    a = trend_regimes(T, seed, trend);
  } else {
    const MsrParams truth = scenario == Scenario::TwoState ? two_state_truth() : three_state_truth();
    SamplePath path = sample_path(truth, T, seed);
    a.states = std::move(path.states);
    a.planted.assign(T + 1, RegimeLabel::Undefined);
    a.prices.closes.resize(T + 1);
    a.prices.closes[0] = 100.0;
    for (std::size_t t = 0; t < T; ++t)
      a.prices.closes[t + 1] = a.prices.closes[t] * std::exp(path.returns[t]);
  }
  a.prices.asset_id = std::string(to_string(scenario));
  a.prices.asset_class = AssetClass::Equities;
  a.prices.dates = business_days(Date{2000, 1, 3}, T + 1);
  return a;
}

}  // namespace kamamsr

#include <cmath>
#include <random>

#include "doctest.h"
#include "kamamsr/errors.hpp"
#include "kamamsr/pipeline.hpp"

using namespace kamamsr;

TEST_CASE("RunConfig parsing") {
  const auto c = RunConfig::from_json(nlohmann::json::object());
  CHECK(c.train_fraction == 0.85);
  CHECK(c.calibrate.n_trials == 50);
  CHECK(c.backtest.n_weight_draws == 1000);
  CHECK(c.msr.restarts == 10);
  CHECK(c.calibrate.cv.kmeans.n_init == 10);
  CHECK(c.calibrate.cv.kmeans.max_iter == 300);
  CHECK(c.costs[AssetClass::Equities].total_pct() == doctest::Approx(0.8));

  auto j = nlohmann::json::parse(R"({
    "seed": 5,
    "market_data": {"train_fraction": 0.8, "cash_annual_rate": 0.02},
    "assets": [{"id": "spx", "path": "spx.csv", "class": "equities"}],
    "kama": {"n": 12, "n_s": 3, "n_l": 25, "gamma": 1.5, "sell_reference": "high"},
    "calibrate": {"n_trials": 7, "ranges": {"n": [6, 20]}, "score_denominator": "days"},
    "backtest": {"bear_mode": "cash", "select_by": "returns", "seed": 123},
    "costs": {"currencies": {"spread_pct": 0.2}}
  })");
  auto r = RunConfig::from_json(j, "/data");
  CHECK(r.train_fraction == 0.8);
  CHECK(r.cash_annual_rate == 0.02);
  CHECK(r.assets.at(0).path == std::filesystem::path("/data/spx.csv"));
  CHECK(r.kama.n == 12);
  CHECK(r.calibrate.sell_reference == SellReference::High);
  CHECK(r.calibrate.ranges.n_max == 20);
  CHECK(r.calibrate.cv.denominator == ScoreDenominator::Days);
  CHECK(r.backtest.bear_mode == BearMode::Cash);
  CHECK(r.costs[AssetClass::Currencies].total_pct() == doctest::Approx(0.2));
  CHECK(r.msr.seed == derive_seed(5, 1));
  CHECK(r.calibrate.seed == derive_seed(5, 2));
  CHECK(r.backtest.seed == 123);
  r.set_seed(6);
  CHECK(r.msr.seed == derive_seed(6, 1));
  CHECK(r.backtest.seed == 123);
  CHECK_THROWS_AS(r.asset("qqq"), ConfigError);

  for (const char* bad : {R"({"train_fraction": 1.0})", R"({"kama": {"n": 1}})",
                          R"({"backtest": {"bear_mode": "hedge"}})", R"({"calibrate": {"ranges": {"n": [50, 10]}}})",
                          R"({"assets": [{"id": "x"}]})"})
    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(bad)), ConfigError);
}

TEST_CASE("prepare_asset") {
  RunConfig cfg;
  auto a = synthesize(Scenario::TwoState, 999, 1);
  const auto p = prepare_asset(a.prices, cfg);
  CHECK(p.split.train_end_index == 850);
  CHECK(p.asset_log.size() == 999);
  CHECK(p.cash_log.size() == 999);
  CHECK(p.train_return_days() == 849);
  a.prices.closes.resize(100);
  a.prices.dates.resize(100);
  CHECK_THROWS_AS(prepare_asset(a.prices, cfg), DataError);
}

TEST_CASE("benchmark models need no KAMA parameters; KAMA+MSR does") {
  RunConfig cfg;
  cfg.msr.restarts = 2;
  cfg.backtest.n_weight_draws = 20;
  const auto p = prepare_asset(synthesize(Scenario::TwoState, 700, 2).prices, cfg);
  const auto b = backtest_asset(p, ModelId::Msr2S, cfg, std::nullopt);
  CHECK(b.weights.size() == p.asset_log.size());
  CHECK(b.test.daily_returns.size() == p.asset_log.size() - p.train_return_days());
  for (double w : b.weights) CHECK((w == 0.0 || w == b.search.policy.w_bull));
  CHECK_THROWS_AS(backtest_asset(p, ModelId::KamaMsr, cfg, std::nullopt), ConfigError);
  const auto three = backtest_asset(p, ModelId::Msr3Sto2S, cfg, std::nullopt);
  CHECK(three.msr.params.k == 3);
}

TEST_CASE("trading tracks are causal") {
  const auto a = synthesize(Scenario::TrendRegimes, 900, 5);
  const auto params = two_state_truth();
  KamaParams k;
  const auto full = trading_track(a.prices.closes, ModelId::KamaMsr, params, &k);
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t cut = 100 + rng() % 790;
    const auto part = trading_track(std::span(a.prices.closes).first(cut), ModelId::KamaMsr, params, &k);
    for (std::size_t d = 0; d < cut; ++d) {
      CHECK(part.activity[d] == full.activity[d]);
      CHECK(part.labels[d] == full.labels[d]);
    }
  }
}

TEST_CASE("label_agreement") {
  using L = RegimeLabel;
  const std::vector<L> a{L::Undefined, L::LowVarBull, L::HighVarBear, L::LowVarBear};
  const std::vector<L> b{L::LowVarBull, L::LowVarBull, L::HighVarBull, L::LowVarBear};
  CHECK(label_agreement(a, b) == doctest::Approx(2.0 / 3));
  CHECK_THROWS(label_agreement(a, std::span(b).first(2)));
}

// One PASS/FAIL line per acceptance criterion; exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "kamamsr/backtest.hpp"
#include "kamamsr/calibrate.hpp"
#include "kamamsr/kama.hpp"
#include "kamamsr/msr.hpp"
#include "kamamsr/pipeline.hpp"
#include "kamamsr/regime.hpp"
#include "kamamsr/synth.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace kamamsr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome misclassification_example() {
  GroupingMatrix m;
  m.counts = {{{1, 0, 0, 0}, {0, 5, 1, 9}, {0, 0, 2, 0}, {3, 0, 3, 0}}};
  const auto rows = row_misclassifications(m);
  const double score = misclassification_score(m, m.total());
  const bool ok = rows == std::array<long, 4>{0, 6, 0, 3} && m.total() == 24 && score == 9.0 / 24.0;
  return {ok, fmt("rows=(%ld,%ld,%ld,%ld) total=%ld score=%.17g", rows[0], rows[1], rows[2], rows[3], m.total(), score)};
}

Outcome filter_smoother_oracle() {
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<int> kk(2, 3), tt(2, 10);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int k = kk(rng), T = tt(rng);
    const auto p = testing::random_params(rng, k);
    const auto r = testing::normal_draws(rng, T);
    const auto f = hamilton_filter(p, r);
    const auto s = kim_smoother(p, f.filtered);
    const auto o = oracle::enumerate_paths(testing::to_chain(p), r);
    worst = std::max(worst, std::abs(f.log_likelihood - o.log_likelihood));
    for (int m = 0; m < T - 1; ++m)
      for (int i = 0; i < k; ++i) {
        worst = std::max(worst, std::abs(f.filtered(m, i) - o.filtered[m][i]));
        worst = std::max(worst, std::abs(s(m, i) - o.smoothed[m][i]));
      }
  }
  return {worst <= 1e-10, fmt("100 instances, max abs error %.3g", worst)};
}

Outcome em_recovery() {
  const auto path = sample_path(two_state_truth(), 5000, 2024);
  EmConfig cfg;
  cfg.seed = 9;
  const auto fit = em_fit(path.returns, 2, cfg);
  const double e0 = std::abs(fit.params.sigma(0) / 0.005 - 1.0);
  const double e1 = std::abs(fit.params.sigma(1) / 0.02 - 1.0);
  long hits = 0;
  for (Eigen::Index m = 0; m < fit.smoothed.rows(); ++m)
    hits += (fit.smoothed(m, 1) > fit.smoothed(m, 0) ? 1 : 0) == path.states[m + 1];
  const double acc = static_cast<double>(hits) / static_cast<double>(fit.smoothed.rows());
  return {e0 <= 0.10 && e1 <= 0.10 && acc >= 0.90,
          fmt("sigma=(%.5f,%.5f) rel err=(%.3f,%.3f) accuracy=%.4f", fit.params.sigma(0), fit.params.sigma(1), e0, e1,
              acc)};
}

Outcome em_monotonicity() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  std::size_t iterations = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const int k = rep % 2 ? 3 : 2;
    const auto truth = testing::random_params(rng, k);
    MsrParams p = k == 2 ? two_state_truth() : three_state_truth();
    p.transition = truth.transition;
    const auto path = sample_path(p, 400 + rng() % 800, rng());
    EmConfig cfg;
    cfg.seed = rng();
    cfg.restarts = 3;
    cfg.tol = 1e-10;
    const auto fit = em_fit(path.returns, k, cfg);
    for (const auto& run : fit.runs)
      for (std::size_t i = 1; i < run.log_likelihood_trace.size(); ++i, ++iterations)
        worst = std::max(worst, run.log_likelihood_trace[i - 1] - run.log_likelihood_trace[i]);
  }
  return {worst <= 1e-8, fmt("20 datasets, %zu iterations, largest decrease %.3g", iterations, worst)};
}

Outcome kama_invariants() {
  std::mt19937_64 rng(555);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution flat(0.25);
  std::uniform_int_distribution<int> nn(2, 40), ns(2, 10), nl(11, 60);
  long er_bad = 0, hull_bad = 0, v_zero = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    KamaParams p;
    p.n = nn(rng);
    p.n_s = ns(rng);
    p.n_l = nl(rng);
    std::vector<double> c(150);
    c[0] = 50.0 + 10 * z(rng);
    const bool with_flats = rep % 3 != 0;
    for (std::size_t i = 1; i < c.size(); ++i) c[i] = (with_flats && flat(rng)) ? c[i - 1] : c[i - 1] + z(rng);
    if (rep % 10 == 0) std::fill(c.begin() + 40, c.begin() + 100, c[40]);
    const auto s = kama_series(c, p);
    for (std::size_t t = static_cast<std::size_t>(p.n); t < c.size(); ++t) {
      if (!(s.er[t] >= 0.0 && s.er[t] <= 1.0)) ++er_bad;
      double v = 0;
      for (std::size_t i = t - p.n + 1; i <= t; ++i) v += std::abs(c[i] - c[i - 1]);
      if (v == 0.0) v_zero += s.er[t] == 0.0;
      if (t > static_cast<std::size_t>(p.n)) {
        const double lo = std::min(s.kama[t - 1], c[t]), hi = std::max(s.kama[t - 1], c[t]);
        const double tol = 1e-12 * std::max(1.0, std::abs(hi));
        if (s.kama[t] < lo - tol || s.kama[t] > hi + tol) ++hull_bad;
      }
    }
  }
  bool constant_ok = true;
  for (int n : {2, 10, 50}) {
    KamaParams p;
    p.n = n;
    const std::vector<double> c(200, 100.0);
    const auto s = kama_series(c, p);
    for (std::size_t t = n; t < c.size(); ++t) constant_ok = constant_ok && s.kama[t] == 100.0;
    for (std::size_t t = s.warmup_end; t < c.size(); ++t) constant_ok = constant_ok && s.filter[t] == 0.0;
  }
  return {er_bad == 0 && hull_bad == 0 && constant_ok && v_zero > 0,
          fmt("1000 series: ER out of range %ld, hull violations %ld, V=0 days checked %ld, constant series %s", er_bad,
              hull_bad, v_zero, constant_ok ? "ok" : "BROKEN")};
}

Outcome smoothing_constants() {
  const double ks = smoothing_constant(2), kl = smoothing_constant(30);
  return {ks == 2.0 / 3.0 && kl == 2.0 / 31.0, fmt("k_s=%.17g k_l=%.17g", ks, kl)};
}

Outcome cost_round_trips() {
  const auto costs = CostSchedule::defaults();
  const std::vector<double> flat(2, 0.0), weights{1.0, 0.0};
  std::string detail;
  bool ok = true;
  for (auto [cls, pct] : {std::pair{AssetClass::Equities, 0.8}, std::pair{AssetClass::Currencies, 0.13},
                          std::pair{AssetClass::Commodities, 0.27}, std::pair{AssetClass::FixedIncome, 0.8}}) {
    const auto r = portfolio_returns(flat, flat, weights, costs, cls);
    const double err = std::abs(r.cost_drag - pct / 100.0);
    ok = ok && err <= 1e-12;
    detail += fmt(detail.empty() ? "%s %.4f%% (err %.1e)" : ", %s %.4f%% (err %.1e)", std::string(to_string(cls)).c_str(), 100 * r.cost_drag, err);
  }
  return {ok, detail};
}

Outcome asr_checks() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(1e-5, 0.03);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> r(5 + rng() % 500);
    for (auto& x : r) x = u(rng);
    const auto a = adjusted_sharpe(r);
    if (!a.value) return {false, "undefined ASR on a positive series"};
    worst = std::max(worst, std::abs(*a.value - a.mar / a.sigma) / std::abs(a.mar / a.sigma));
  }
  const double closed = adjusted_sharpe_closed_form(-0.05, 0.02, 0.2);
  const double expect = -0.05 * std::pow(0.2, 2.5);
  return {worst <= 1e-12 && std::abs(closed - expect) <= 1e-15 && std::abs(closed + 8.944e-4) < 5e-7,
          fmt("Sharpe agreement max rel err %.2g; closed form %.6g", worst, closed)};
}

Outcome winning_score_checks() {
  const auto w = winning_score(std::vector<double>{0.10, 0.08});
  const double ulps = std::abs(w.ws - 0.2) / std::numeric_limits<double>::epsilon() / 0.2;
  const bool tie_ok = winning_score(std::vector<double>{0.3, 0.3, 0.1}).ws == 0.0;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0), lam(1e-3, 1e3);
  bool scale_ok = true;
  for (int rep = 0; rep < 20; ++rep) {
    const std::vector<double> s{u(rng), u(rng), u(rng)};
    const double l = lam(rng);
    const auto a = winning_score(s);
    const auto b = winning_score(std::vector<double>{l * s[0], l * s[1], l * s[2]});
    scale_ok = scale_ok && a.winner == b.winner && std::abs(a.ws - b.ws) <= 1e-12;
  }
  return {w.winner == 0 && ulps <= 4 && tie_ok && scale_ok,
          fmt("WS=%.17g (%.1f ulp from 0.2), tie %s, scaling %s", w.ws, ulps, tie_ok ? "0" : "nonzero",
              scale_ok ? "invariant" : "VARIES")};
}

Outcome end_to_end_determinism() {
  const auto root = testing::scratch("acceptance_determinism");
  auto run = [&](std::vector<std::string> a) { return testing::cli(std::move(a)).code; };
  if (run({"synth", "--scenario", "trend_regimes", "--length", "3000", "--seed", "42", "--out",
           (root / "data").string(), "--asset", "trend"}) != 0)
    return {false, "synth failed"};
  nlohmann::json cfg{{"seed", 42},
                     {"assets", {{{"id", "trend"}, {"path", "data/trend/prices.csv"}, {"class", "equities"}}}}};
  testing::write_config(root / "cfg.json", cfg);
  std::vector<std::string> files{"calibration.json", "backtest_kama_msr.json", "backtest_msr2s.json",
                                 "backtest_msr3s_to_2s.json", "equity_kama_msr.csv", "manifest.json"};
  std::vector<std::string> first;
  for (const char* out : {"run1", "run2"}) {
    const std::string c = (root / "cfg.json").string(), o = (root / out).string();
    if (run({"calibrate", "--config", c, "--out", o}) != 0) return {false, "calibrate failed"};
    if (run({"backtest", "--config", c, "--out", o}) != 0) return {false, "backtest failed"};
  }
  std::size_t same = 0;
  for (const auto& f : files) same += testing::slurp(root / "run1/trend" / f) == testing::slurp(root / "run2/trend" / f);
  const auto cal = testing::slurp(root / "run1/trend/calibration.json");
  const auto j = nlohmann::json::parse(cal);
  const auto bt = nlohmann::json::parse(testing::slurp(root / "run1/trend/backtest_kama_msr.json"));
  const bool sizes = j.at("trials").size() == 50 && bt.at("draws").size() == 1000;
  return {same == files.size() && sizes,
          fmt("%zu/%zu artifacts byte-identical (50 trials, 1000 draws)", same, files.size())};
}

Outcome synthetic_separation() {
  RunConfig cfg;
  cfg.set_seed(42);
  const auto a = synthesize(Scenario::TrendRegimes, 3000, 42, cfg.synth.trend);
  const auto asset = prepare_asset(a.prices, cfg);
  const auto cal = calibrate_asset(asset, cfg);
  const auto& best = cal.search.best;
  const std::size_t n = asset.split.train_end_index;
  const std::span<const double> closes(asset.prices.closes.data(), n);
  const auto ks = kama_series(closes, best.params);
  const auto labels = label_days(cal.p_low, trend_signals(ks, best.params));
  const double agree = label_agreement(labels, std::span<const RegimeLabel>(a.planted).first(n));
  return {best.cv_score <= 0.1 && agree >= 0.80,
          fmt("cv_score=%.4f agreement=%.4f (theta n=%d n_s=%d n_l=%d gamma=%.3f)", best.cv_score, agree,
              best.params.n, best.params.n_s, best.params.n_l, best.params.gamma)};
}

Outcome no_lookahead() {
  RunConfig cfg;
  cfg.set_seed(5);
  cfg.msr.restarts = 4;
  const auto a = synthesize(Scenario::TrendRegimes, 1600, 5, cfg.synth.trend);
  const auto asset = prepare_asset(a.prices, cfg);
  const auto msr2 = fit_training_msr(asset, 2, cfg.msr).params;
  const auto msr3 = fit_training_msr(asset, 3, cfg.msr).params;
  const KamaParams kama{14, 3, 35, 1.2};
  const ClassCosts costs = cfg.costs[AssetClass::Equities];
  StrategyPolicy policy;
  policy.w_bull = 0.7;
  policy.w_bear = 0.4;

  std::mt19937_64 rng(12);
  long checked = 0, mismatches = 0;
  for (ModelId m : kAllModels) {
    policy.model = m;
    const MsrParams& mp = m == ModelId::Msr3Sto2S ? msr3 : msr2;
    const auto full_track = trading_track(asset.prices.closes, m, mp, &kama);
    const auto full_w = return_day_weights(full_track, policy);
    const auto full_r = portfolio_returns(asset.asset_log, asset.cash_log, full_w, costs);
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t t = 80 + rng() % (asset.prices.size() - 81);  // last kept price day
      const std::span<const double> closes(asset.prices.closes.data(), t + 1);
      const auto track = trading_track(closes, m, mp, &kama);
      const auto w = return_day_weights(track, policy);
      const auto r = portfolio_returns(std::span(asset.asset_log).first(t), std::span(asset.cash_log).first(t), w, costs);
      for (std::size_t j = 0; j < t; ++j, ++checked)
        mismatches += w[j] != full_w[j] || r.daily_returns[j] != full_r.daily_returns[j];
    }
  }
  return {mismatches == 0 && checked > 0,
          fmt("3 models x 20 truncation points, %ld day comparisons, %ld mismatches", checked, mismatches)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "misclassification worked example", misclassification_example},
      {2, "filter/smoother vs path enumeration", filter_smoother_oracle},
      {3, "EM recovery on planted two-state data", em_recovery},
      {4, "EM log-likelihood monotonicity", em_monotonicity},
      {5, "KAMA invariants", kama_invariants},
      {6, "smoothing constants", smoothing_constants},
      {7, "round-trip cost exactness", cost_round_trips},
      {8, "adjusted Sharpe ratio", asr_checks},
      {9, "winning score", winning_score_checks},
      {10, "end-to-end determinism", end_to_end_determinism},
      {11, "synthetic regime separation", synthetic_separation},
      {12, "no lookahead", no_lookahead},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %2d. %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}

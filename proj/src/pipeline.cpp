#include "kamamsr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "kamamsr/errors.hpp"

namespace kamamsr {

namespace {

enum SeedStream : std::uint64_t { kMsrStream = 1, kCalibrateStream = 2, kBacktestStream = 3 };

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("out")) c.out_dir = resolve(base_dir, j["out"].get<std::string>());

    const nlohmann::json& md = j.contains("market_data") ? j["market_data"] : j;
    c.train_fraction = md.value("train_fraction", c.train_fraction);
    c.cash_annual_rate = md.value("cash_annual_rate", c.cash_annual_rate);
    c.min_series_length = md.value("min_series_length", c.min_series_length);
    if (md.contains("cash_path") && !md["cash_path"].is_null())
      c.cash_path = resolve(base_dir, md["cash_path"].get<std::string>());
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
      throw ConfigError("train_fraction must lie in (0, 1)");
    if (c.cash_annual_rate < 0.0) throw ConfigError("cash_annual_rate must be >= 0");

    for (const auto& a : j.value("assets", nlohmann::json::array())) {
      AssetSpec s;
      s.id = a.at("id").get<std::string>();
      s.path = resolve(base_dir, a.at("path").get<std::string>());
      s.asset_class = asset_class_from_string(a.value("class", std::string("equities")));
      c.assets.push_back(std::move(s));
    }

    if (j.contains("msr")) {
      const auto& m = j["msr"];
      c.msr.restarts = m.value("restarts", c.msr.restarts);
      c.msr.tol = m.value("tol", c.msr.tol);
      c.msr.max_iter = m.value("max_iter", c.msr.max_iter);
      if (m.contains("seed")) {
        c.msr.seed = m["seed"].get<std::uint64_t>();
        c.msr_seed_set_ = true;
      }
    }
    if (j.contains("kama")) c.kama = kama_params_from_json(j["kama"]);

    c.calibrate.coefficient_form = c.kama.coefficient_form;
    c.calibrate.sell_reference = c.kama.sell_reference;
    if (j.contains("calibrate")) {
      const auto& cal = j["calibrate"];
      c.calibrate.n_trials = cal.value("n_trials", c.calibrate.n_trials);
      c.calibrate.threshold = cal.value("threshold", c.calibrate.threshold);
      if (cal.contains("seed")) {
        c.calibrate.seed = cal["seed"].get<std::uint64_t>();
        c.calibrate_seed_set_ = true;
      }
      if (cal.contains("ranges")) {
        const auto& r = cal["ranges"];
        auto& R = c.calibrate.ranges;
        auto pair = [&](const char* key, auto& lo, auto& hi) {
          if (!r.contains(key)) return;
          lo = r[key].at(0).get<std::remove_reference_t<decltype(lo)>>();
          hi = r[key].at(1).get<std::remove_reference_t<decltype(hi)>>();
        };
        pair("n", R.n_min, R.n_max);
        pair("n_s", R.n_s_min, R.n_s_max);
        pair("n_l", R.n_l_min, R.n_l_max);
        pair("gamma", R.gamma_min, R.gamma_max);
      }
      if (cal.contains("kmeans")) {
        const auto& km = cal["kmeans"];
        c.calibrate.cv.kmeans.k = km.value("k", c.calibrate.cv.kmeans.k);
        c.calibrate.cv.kmeans.n_init = km.value("n_init", c.calibrate.cv.kmeans.n_init);
        c.calibrate.cv.kmeans.max_iter = km.value("max_iter", c.calibrate.cv.kmeans.max_iter);
      }
      if (cal.contains("score_denominator"))
        c.calibrate.cv.denominator =
            score_denominator_from_string(cal["score_denominator"].get<std::string>());
    }
    c.calibrate.ranges.validate();

    if (j.contains("backtest")) {
      const auto& b = j["backtest"];
      c.backtest.n_weight_draws = b.value("n_weight_draws", c.backtest.n_weight_draws);
      if (b.contains("bear_mode"))
        c.backtest.bear_mode = bear_mode_from_string(b["bear_mode"].get<std::string>());
      if (b.contains("select_by"))
        c.backtest.select_by = select_by_from_string(b["select_by"].get<std::string>());
      if (b.contains("seed")) {
        c.backtest.seed = b["seed"].get<std::uint64_t>();
        c.backtest_seed_set_ = true;
      }
    }
    if (j.contains("costs")) c.costs = cost_schedule_from_json(j["costs"]);

    if (j.contains("synth")) {
      const auto& s = j["synth"];
      c.synth.length = s.value("length", c.synth.length);
      auto& t = c.synth.trend;
      t.low_sigma = s.value("low_sigma", t.low_sigma);
      t.high_sigma = s.value("high_sigma", t.high_sigma);
      t.low_drift = s.value("low_drift", t.low_drift);
      t.high_drift = s.value("high_drift", t.high_drift);
      t.min_episode = s.value("min_episode", t.min_episode);
      t.max_episode = s.value("max_episode", t.max_episode);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.set_seed(c.seed);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  if (!msr_seed_set_) msr.seed = derive_seed(s, kMsrStream);
  if (!calibrate_seed_set_) calibrate.seed = derive_seed(s, kCalibrateStream);
  if (!backtest_seed_set_) backtest.seed = derive_seed(s, kBacktestStream);
  calibrate.cv.seed = calibrate.seed;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json assets_j = nlohmann::json::array();
  for (const auto& a : assets)
    assets_j.push_back({{"id", a.id}, {"path", a.path.string()},
                        {"class", std::string(kamamsr::to_string(a.asset_class))}});
  return {
      {"seed", seed},
      {"assets", assets_j},
      {"train_fraction", train_fraction},
      {"cash_annual_rate", cash_annual_rate},
      {"min_series_length", min_series_length},
      {"msr", {{"restarts", msr.restarts}, {"tol", msr.tol}, {"max_iter", msr.max_iter},
               {"seed", msr.seed}}},
      {"kama", kamamsr::to_json(kama)},
      {"calibrate",
       {{"n_trials", calibrate.n_trials},
        {"seed", calibrate.seed},
        {"threshold", calibrate.threshold},
        {"ranges", kamamsr::to_json(calibrate.ranges)},
        {"kmeans", {{"k", calibrate.cv.kmeans.k},
                    {"n_init", calibrate.cv.kmeans.n_init},
                    {"max_iter", calibrate.cv.kmeans.max_iter}}},
        {"score_denominator", std::string(kamamsr::to_string(calibrate.cv.denominator))}}},
      {"backtest", {{"n_weight_draws", backtest.n_weight_draws},
                    {"seed", backtest.seed},
                    {"bear_mode", std::string(kamamsr::to_string(backtest.bear_mode))},
                    {"select_by", std::string(kamamsr::to_string(backtest.select_by))}}},
      {"costs", kamamsr::to_json(costs)},
  };
}

const AssetSpec& RunConfig::asset(std::string_view id) const {
  for (const auto& a : assets)
    if (a.id == id) return a;
  throw ConfigError("asset '" + std::string(id) + "' is not listed in the config");
}

PreparedAsset prepare_asset(PriceSeries prices, const RunConfig& cfg) {
  prices.validate();
  if (prices.size() < cfg.min_series_length)
    throw DataError("asset '" + prices.asset_id + "' has " + std::to_string(prices.size()) +
                    " prices, need at least " + std::to_string(cfg.min_series_length));
  PreparedAsset a;
  const TrainTest tt = split_train_test(prices, cfg.train_fraction);
  a.split = tt.split;
  if (a.split.train_end_index < 3) throw ConfigError("training partition too short");

  if (cfg.cash_path) {
    PriceSeries cash = load_csv(*cfg.cash_path, AssetClass::Cash, LoadOptions{0});
    if (cash.dates != prices.dates)
      throw DataError("cash series dates do not match asset '" + prices.asset_id + "'");
    a.cash = std::move(cash);
  } else {
    a.cash = synth_cash_index(prices.dates, cfg.cash_annual_rate);
  }
  a.asset_log = log_returns(std::span<const double>(prices.closes));
  a.cash_log = log_returns(std::span<const double>(a.cash.closes));
  a.prices = std::move(prices);
  return a;
}

PreparedAsset load_asset(const AssetSpec& spec, const RunConfig& cfg) {
  PriceSeries p = load_csv(spec.path, spec.asset_class, LoadOptions{cfg.min_series_length});
  p.asset_id = spec.id;
  return prepare_asset(std::move(p), cfg);
}

MsrFit fit_training_msr(const PreparedAsset& asset, int k, const EmConfig& cfg, Execution exec) {
  const std::span<const double> train(asset.asset_log.data(), asset.train_return_days());
  return em_fit(train, k, cfg, exec);
}

CalibrationOutcome calibrate_asset(const PreparedAsset& asset, const RunConfig& cfg,
                                   Execution exec) {
  const std::size_t n_train = asset.split.train_end_index;
  const auto longest =
      static_cast<std::size_t>(std::max(cfg.calibrate.ranges.n_l_max, cfg.calibrate.ranges.n_max));
  if (n_train <= longest)
    throw ConfigError("training partition (" + std::to_string(n_train) +
                      " days) is too short for the largest KAMA window (" + std::to_string(longest) + ")");
  CalibrationOutcome out;
  out.msr = fit_training_msr(asset, 2, cfg.msr, exec);
  out.p_low = align_to_price_days(out.msr.smoothed, 0, n_train);
  const std::span<const double> closes(asset.prices.closes.data(), n_train);
  out.search = random_search(closes, out.p_low, cfg.calibrate, exec);
  return out;
}

TradingTrack trading_track(std::span<const double> closes, ModelId model, const MsrParams& msr,
                           const KamaParams* kama) {
  const std::vector<double> r = log_returns(closes);
  const FilterResult f = hamilton_filter(msr, r);
  const std::size_t n = closes.size();
  TradingTrack tr;
  tr.p_low = align_to_price_days(f.filtered, 0, n);

  if (model == ModelId::KamaMsr) {
    if (msr.k != 2) throw std::invalid_argument("KAMA+MSR needs a two-state model");
    if (!kama) throw ConfigError("KAMA+MSR backtest requires calibrated KAMA parameters");
    tr.kama = kama_series(closes, *kama);
    tr.signals = trend_signals(tr.kama, *kama);
    tr.labels = label_days(tr.p_low, tr.signals);
    tr.activity = activity_from_labels(tr.labels);
    tr.regime_code.resize(n);
    for (std::size_t d = 0; d < n; ++d) tr.regime_code[d] = static_cast<int>(tr.labels[d]);
    return tr;
  }

  tr.states.assign(n, -1);
  if (model == ModelId::Msr2S) {
    if (msr.k != 2) throw std::invalid_argument("MSR 2S needs a two-state model");
    for (std::size_t d = 2; d < n; ++d) tr.states[d] = tr.p_low[d] > 0.5 ? 0 : 1;
  } else {
    if (msr.k != 3) throw std::invalid_argument("MSR 3S->2S needs a three-state model");
    const auto reduced = reduce_three_to_two(f.filtered);
    for (std::size_t m = 0; m < reduced.size(); ++m) tr.states[m + 2] = reduced[m];
  }
  tr.activity = activity_from_states(tr.states);
  tr.regime_code = tr.states;
  return tr;
}

std::vector<double> return_day_weights(const TradingTrack& track, const StrategyPolicy& policy) {
  std::vector<double> w = target_weights(track.activity, policy);
  w.pop_back();  // target at price day j is held over return day j
  return w;
}

namespace {

std::vector<DayRange> window_runs(std::span<const int> codes, std::size_t begin, std::size_t end) {
  return runs(codes.subspan(begin, end - begin));
}

}  // namespace

BacktestOutcome backtest_asset(const PreparedAsset& asset, ModelId model, const RunConfig& cfg,
                               const std::optional<KamaParams>& calibrated, Execution exec) {
  const std::size_t n_ret = asset.asset_log.size();
  const std::size_t train_days = asset.train_return_days();
  if (train_days >= n_ret) throw ConfigError("test partition is empty");

  BacktestOutcome out;
  out.model = model;
  out.kama = calibrated;
  out.msr = fit_training_msr(asset, model == ModelId::Msr3Sto2S ? 3 : 2, cfg.msr, exec);
  out.track = trading_track(asset.prices.closes, model, out.msr.params,
                            model == ModelId::KamaMsr && calibrated ? &*calibrated : nullptr);

  // regime code of the price day whose close set the position
  const std::span<const int> codes(out.track.regime_code.data(), n_ret);
  const std::span<const int> activity(out.track.activity.data(), n_ret);

  StrategyPolicy skeleton;
  skeleton.model = model;
  skeleton.bear_mode = cfg.backtest.bear_mode;
  const auto train_ranges = window_runs(codes, 0, train_days);
  const ClassCosts& costs = cfg.costs[asset.prices.asset_class];
  out.search = optimize_weights(
      std::span<const double>(asset.asset_log.data(), train_days),
      std::span<const double>(asset.cash_log.data(), train_days), activity.first(train_days),
      train_ranges, skeleton, costs,
      OptimizeConfig{cfg.backtest.n_weight_draws, cfg.backtest.seed, cfg.backtest.select_by}, exec);

  out.weights = return_day_weights(out.track, out.search.policy);
  const std::span<const double> w(out.weights);
  out.train = portfolio_returns(std::span<const double>(asset.asset_log).first(train_days),
                                std::span<const double>(asset.cash_log).first(train_days),
                                w.first(train_days), costs);
  score(out.train, train_ranges);

  out.test_begin = train_days;
  const std::size_t test_days = n_ret - train_days;
  out.test = portfolio_returns(std::span<const double>(asset.asset_log).subspan(train_days),
                               std::span<const double>(asset.cash_log).subspan(train_days),
                               w.subspan(train_days), costs, w[train_days - 1]);
  score(out.test, window_runs(codes, train_days, train_days + test_days));
  return out;
}

double label_agreement(std::span<const RegimeLabel> labels, std::span<const RegimeLabel> planted) {
  if (labels.size() != planted.size()) throw std::invalid_argument("label_agreement: length mismatch");
  std::size_t defined = 0, hits = 0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] == RegimeLabel::Undefined || planted[t] == RegimeLabel::Undefined) continue;
    ++defined;
    if (labels[t] == planted[t]) ++hits;
  }
  return defined ? static_cast<double>(hits) / static_cast<double>(defined) : 0.0;
}

}  // namespace kamamsr

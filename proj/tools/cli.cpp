#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>

#include "CLI11.hpp"

#include "kamamsr/errors.hpp"
#include "kamamsr/pipeline.hpp"
#include "report.hpp"

namespace kamamsr {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> assets;
  bool serial = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config, "JSON run configuration");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "global seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--asset", c.assets, "asset id from the config (repeatable; default all)");
  cmd->add_flag("--serial", c.serial, "run trials, restarts and draws on one thread");
}

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

std::vector<const AssetSpec*> selected_assets(const RunConfig& cfg, const Common& c) {
  std::vector<const AssetSpec*> out;
  if (c.assets.empty()) {
    for (const auto& a : cfg.assets) out.push_back(&a);
  } else {
    for (const auto& id : c.assets) out.push_back(&cfg.asset(id));
  }
  if (out.empty()) throw ConfigError("no assets listed in the config");
  return out;
}

Execution exec_of(const Common& c) { return c.serial ? Execution::Serial : Execution::Parallel; }

nlohmann::json calibration_fingerprint(const RunConfig& cfg) {
  const auto full = cfg.to_json();
  return {{"train_fraction", cfg.train_fraction},
          {"msr", full["msr"]},
          {"calibrate", full["calibrate"]},
          {"coefficient_form", std::string(to_string(cfg.calibrate.coefficient_form))},
          {"sell_reference", std::string(to_string(cfg.calibrate.sell_reference))}};
}

KamaParams write_calibration(const PreparedAsset& asset, const CalibrationOutcome& cal, const RunConfig& cfg,
                             const fs::path& dir, std::ostream& err) {
  const auto& best = cal.search.best;
  const std::size_t n = asset.split.train_end_index;
  const std::span<const double> closes(asset.prices.closes.data(), n);
  const std::span<const Date> dates(asset.prices.dates.data(), n);
  const KamaSeries ks = kama_series(closes, best.params);
  const auto signals = trend_signals(ks, best.params);
  const auto labels = label_days(cal.p_low, signals, cfg.calibrate.threshold);
  const auto segs = segment_features(closes, segment(labels));

  nlohmann::json trials = nlohmann::json::array();
  bool all_short = true;
  for (const auto& t : cal.search.trials) {
    trials.push_back(to_json(t));
    all_short = all_short && t.insufficient_segments;
  }
  nlohmann::json j{{"asset", asset.prices.asset_id},
                   {"seed", cfg.seed},
                   {"calibrate_seed", cfg.calibrate.seed},
                   {"fingerprint", calibration_fingerprint(cfg)},
                   {"train_days", n},
                   {"ranges", to_json(cfg.calibrate.ranges)},
                   {"n_trials", cfg.calibrate.n_trials},
                   {"score_denominator", std::string(to_string(cfg.calibrate.cv.denominator))},
                   {"best", to_json(best)},
                   {"trials", trials},
                   {"msr", to_json(cal.msr)},
                   {"n_segments", segs.size()}};
  if (all_short) {
    const std::string w = "every trial produced fewer than " + std::to_string(kMinCvSegments) +
                          " segments; all scored 1.0";
    j["warning"] = w;
    err << "warning: " << asset.prices.asset_id << ": " << w << "\n";
  }
  report::write_json(dir / "calibration.json", j);
  report::write_text(dir / "kama.csv", report::kama_csv(ks, signals, dates));
  report::write_text(dir / "labels.csv", report::labels_csv(labels, dates));
  report::write_text(dir / "segments.csv", report::segments_csv(segs, dates));
  return best.params;
}

KamaParams calibrated_params(const PreparedAsset& asset, const RunConfig& cfg, const fs::path& dir,
                             Execution exec, std::ostream& out, std::ostream& err) {
  const fs::path file = dir / "calibration.json";
  if (fs::exists(file)) {
    const auto j = report::read_json(file);
    if (j.value("fingerprint", nlohmann::json()) == calibration_fingerprint(cfg))
      return kama_params_from_json(j.at("best").at("params"));
  }
  out << asset.prices.asset_id << ": no matching calibration, calibrating\n";
  return write_calibration(asset, calibrate_asset(asset, cfg, exec), cfg, dir, err);
}

int cmd_fit_msr(const Common& c, int k, std::ostream& out) {
  const RunConfig cfg = load_config(c);
  for (const AssetSpec* spec : selected_assets(cfg, c)) {
    const PreparedAsset asset = load_asset(*spec, cfg);
    const MsrFit fit = fit_training_msr(asset, k, cfg.msr, exec_of(c));
    const fs::path dir = cfg.out_dir / spec->id;
    nlohmann::json j = to_json(fit);
    j["asset"] = spec->id;
    j["seed"] = cfg.seed;
    j["train_days"] = asset.split.train_end_index;
    const std::string tag = "k" + std::to_string(k);
    report::write_json(dir / ("msr_" + tag + ".json"), j);
    report::write_text(dir / ("filtered_" + tag + ".csv"), report::probabilities_csv(fit.filtered, asset.prices.dates));
    report::write_text(dir / ("smoothed_" + tag + ".csv"), report::probabilities_csv(fit.smoothed, asset.prices.dates));
    report::write_manifest(dir, spec->id);
    out << spec->id << ": k=" << k << " log_likelihood=" << report::num(fit.log_likelihood) << " sigma=(";
    for (int i = 0; i < k; ++i) out << (i ? "," : "") << report::num(fit.params.sigma(i));
    out << ")\n";
  }
  return 0;
}

int cmd_calibrate(const Common& c, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(c);
  for (const AssetSpec* spec : selected_assets(cfg, c)) {
    const PreparedAsset asset = load_asset(*spec, cfg);
    const fs::path dir = cfg.out_dir / spec->id;
    const CalibrationOutcome cal = calibrate_asset(asset, cfg, exec_of(c));
    const KamaParams best = write_calibration(asset, cal, cfg, dir, err);
    report::write_manifest(dir, spec->id);
    out << spec->id << ": cv_score=" << report::num(cal.search.best.cv_score) << " n=" << best.n
        << " n_s=" << best.n_s << " n_l=" << best.n_l << " gamma=" << report::num(best.gamma) << "\n";
  }
  return 0;
}

int cmd_backtest(const Common& c, const std::string& model_arg, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(c);
  std::vector<ModelId> models;
  if (model_arg == "all") {
    models.assign(kAllModels.begin(), kAllModels.end());
  } else {
    models.push_back(model_id_from_string(model_arg));
  }
  for (const AssetSpec* spec : selected_assets(cfg, c)) {
    const PreparedAsset asset = load_asset(*spec, cfg);
    const fs::path dir = cfg.out_dir / spec->id;
    for (ModelId m : models) {
      std::optional<KamaParams> kama;
      if (m == ModelId::KamaMsr) kama = calibrated_params(asset, cfg, dir, exec_of(c), out, err);
      const BacktestOutcome b = backtest_asset(asset, m, cfg, kama, exec_of(c));
      const std::string name(to_string(m));
      report::write_json(dir / ("backtest_" + name + ".json"), report::backtest_json(b, asset, cfg));
      report::write_text(dir / ("equity_" + name + ".csv"), report::equity_csv(b, asset));
      report::write_text(dir / ("positions_" + name + ".csv"), report::positions_csv(b, asset));
      report::write_text(dir / ("labels_" + name + ".csv"), report::track_labels_csv(b, asset));
      const auto asr = b.test.asr.value;
      out << spec->id << ": " << name << " w_bull=" << report::num(b.search.policy.w_bull)
          << " w_bear=" << report::num(b.search.policy.w_bear)
          << " test_return=" << report::num(b.test.weighted_annual_return)
          << " test_asr=" << (asr ? report::num(*asr) : "undefined") << "\n";
    }
    report::write_manifest(dir, spec->id);
  }
  return 0;
}

int cmd_compare(const Common& c, std::ostream& out) {
  const RunConfig cfg = load_config(c);
  std::vector<AssetComparison> rows;
  for (const AssetSpec* spec : selected_assets(cfg, c)) {
    std::array<double, 3> ret{}, asr{};
    for (std::size_t m = 0; m < kAllModels.size(); ++m) {
      const std::string name(to_string(kAllModels[m]));
      const fs::path file = cfg.out_dir / spec->id / ("backtest_" + name + ".json");
      if (!fs::exists(file))
        throw DataError("asset '" + spec->id + "' has no " + name + " backtest (" + file.string() + ")");
      const auto j = report::read_json(file);
      const auto& test = j.at("test");
      ret[m] = test.at("weighted_annual_return").get<double>();
      asr[m] = test.at("asr").is_null() ? std::nan("") : test.at("asr").get<double>();
    }
    rows.push_back(compare_asset(spec->id, spec->asset_class, ret, asr));
  }
  const auto classes = aggregate_by_class(rows);
  auto j = report::comparison_json(rows, classes);
  j["seed"] = cfg.seed;
  report::write_json(cfg.out_dir / "comparison.json", j);
  report::write_text(cfg.out_dir / "comparison.csv", report::comparison_csv(rows, classes));
  for (const auto& cl : classes) {
    out << to_string(cl.asset_class) << " (" << cl.n_assets << " assets) combined:";
    for (std::size_t m = 0; m < kAllModels.size(); ++m)
      out << " " << to_string(kAllModels[m]) << "=" << report::num(cl.combined[m]);
    out << "\n";
  }
  return 0;
}

int cmd_synth(const Common& c, const std::string& scenario_arg, std::optional<long long> length,
              std::ostream& out) {
  const RunConfig cfg = load_config(c);
  const Scenario sc = scenario_from_string(scenario_arg);
  const long long T = length.value_or(static_cast<long long>(cfg.synth.length));
  if (T < 2) throw ConfigError("synthetic length must be at least 2 returns");
  if (c.assets.size() > 1) throw ConfigError("synth writes a single asset");
  const std::string id = c.assets.empty() ? scenario_arg : c.assets.front();

  SyntheticAsset a = synthesize(sc, static_cast<std::size_t>(T), cfg.seed, cfg.synth.trend);
  a.prices.asset_id = id;
  const fs::path dir = cfg.out_dir / id;
  fs::create_directories(dir);
  write_price_csv(a.prices, dir / "prices.csv");

  std::string truth = "date,state,label\n";
  for (std::size_t d = 0; d < a.prices.size(); ++d)
    truth += a.prices.dates[d].iso() + "," + (d == 0 ? std::string("") : std::to_string(a.states[d - 1])) + "," +
             std::string(to_string(a.planted[d])) + "\n";
  report::write_text(dir / "truth.csv", truth);

  nlohmann::json j{{"scenario", scenario_arg}, {"seed", cfg.seed}, {"length", T}};
  if (sc == Scenario::TrendRegimes) {
    const auto& t = cfg.synth.trend;
    j["trend"] = {{"low_sigma", t.low_sigma},     {"high_sigma", t.high_sigma},
                  {"low_drift", t.low_drift},     {"high_drift", t.high_drift},
                  {"min_episode", t.min_episode}, {"max_episode", t.max_episode}};
  } else {
    j["params"] = to_json(sc == Scenario::TwoState ? two_state_truth() : three_state_truth());
  }
  report::write_json(dir / "truth.json", j);
  report::write_manifest(dir, id);
  out << id << ": " << a.prices.size() << " prices written to " << (dir / "prices.csv").string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"KAMA+MSR regime detection and backtesting"};
  app.require_subcommand(1);

  Common fit_c, cal_c, bt_c, cmp_c, syn_c;
  int k = 2;
  std::string model = "all";
  std::string scenario;
  std::optional<long long> length;

  auto* fit = app.add_subcommand("fit-msr", "fit a Markov-switching model on the training partition");
  add_common(fit, fit_c);
  fit->add_option("--k", k, "number of states")->check(CLI::IsMember({2, 3}));

  auto* cal = app.add_subcommand("calibrate", "random-search the KAMA parameters");
  add_common(cal, cal_c);

  auto* bt = app.add_subcommand("backtest", "optimize weights on training data and evaluate on the test split");
  add_common(bt, bt_c);
  bt->add_option("--model", model, "kama_msr, msr2s, msr3s_to_2s or all")
      ->check(CLI::IsMember({"all", "kama_msr", "msr2s", "msr3s_to_2s"}));

  auto* cmp = app.add_subcommand("compare", "winning-score comparison of finished backtests");
  add_common(cmp, cmp_c);

  auto* syn = app.add_subcommand("synth", "write a synthetic price series with its planted truth");
  add_common(syn, syn_c, false);
  syn->add_option("--scenario", scenario, "two_state, three_state or trend_regimes")
      ->required()
      ->check(CLI::IsMember({"two_state", "three_state", "trend_regimes"}));
  syn->add_option("--length", length, "number of returns");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return 2;
  }

  try {
    if (fit->parsed()) return cmd_fit_msr(fit_c, k, out);
    if (cal->parsed()) return cmd_calibrate(cal_c, out, err);
    if (bt->parsed()) return cmd_backtest(bt_c, model, out, err);
    if (cmp->parsed()) return cmd_compare(cmp_c, out);
    if (syn->parsed()) return cmd_synth(syn_c, scenario, length, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace kamamsr

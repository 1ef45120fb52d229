#include "report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kamamsr/errors.hpp"

namespace kamamsr::report {

namespace fs = std::filesystem;

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

std::string_view state_name(int s) {
  return s == 0 ? "low_var" : s == 1 ? "high_var" : "undefined";
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing artifact: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt artifact " + path.string() + ": " + e.what());
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

void write_manifest(const fs::path& dir, const std::string& asset_id) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  nlohmann::json arts = nlohmann::json::array();
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    arts.push_back({{"file", f.filename().string()}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  write_json(dir / "manifest.json", {{"asset", asset_id}, {"artifacts", arts}});
}

std::string probabilities_csv(const ProbMatrix& probs, std::span<const Date> dates, std::size_t first_day) {
  std::string s = "date";
  for (Eigen::Index i = 0; i < probs.cols(); ++i) s += ",p" + std::to_string(i);
  s += "\n";
  for (Eigen::Index m = 0; m < probs.rows(); ++m) {
    s += dates[first_day + static_cast<std::size_t>(m)].iso();
    for (Eigen::Index i = 0; i < probs.cols(); ++i) s += "," + num(probs(m, i));
    s += "\n";
  }
  return s;
}

std::string kama_csv(const KamaSeries& k, std::span<const TrendSignal> signals, std::span<const Date> dates) {
  std::string s = "date,kama,er,filter,signal\n";
  for (std::size_t t = 0; t < k.kama.size(); ++t)
    s += dates[t].iso() + "," + num(k.kama[t]) + "," + num(k.er[t]) + "," + num(k.filter[t]) + "," +
         std::string(to_string(signals[t])) + "\n";
  return s;
}

std::string labels_csv(std::span<const RegimeLabel> labels, std::span<const Date> dates) {
  std::string s = "date,label\n";
  for (std::size_t t = 0; t < labels.size(); ++t)
    s += dates[t].iso() + "," + std::string(to_string(labels[t])) + "\n";
  return s;
}

std::string segments_csv(std::span<const Segment> segs, std::span<const Date> dates) {
  std::string s = "start_date,end_date,label,n_days,slope,volatility,short_segment\n";
  for (const auto& g : segs)
    s += dates[g.start_index].iso() + "," + dates[g.end_index].iso() + "," + std::string(to_string(g.label)) +
         "," + std::to_string(g.n_days) + "," + num(g.slope) + "," + num(g.volatility) + "," +
         (g.short_segment ? "true" : "false") + "\n";
  return s;
}

nlohmann::json metrics_json(const BacktestResult& r, std::span<const Date> return_dates, std::size_t offset) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& m : r.per_segment)
    segs.push_back({{"start_date", return_dates[offset + m.start].iso()},
                    {"end_date", return_dates[offset + m.end].iso()},
                    {"n_days", m.n_days},
                    {"annual_return", m.annual_return}});
  return {{"n_days", r.daily_returns.size()},
          {"weighted_annual_return", r.weighted_annual_return},
          {"whole_period_annual_return", r.whole_period_annual_return},
          {"asr", opt(r.asr.value)},
          {"mar", r.asr.mar},
          {"sigma", r.asr.sigma},
          {"mar_plus", opt(r.asr.mar_plus)},
          {"no_positive_returns", r.asr.no_positive_returns},
          {"turnover", r.turnover},
          {"cost_drag", r.cost_drag},
          {"per_segment", segs}};
}

nlohmann::json backtest_json(const BacktestOutcome& b, const PreparedAsset& asset, const RunConfig& cfg) {
  const std::span<const Date> ret_dates(asset.prices.dates.data() + 1, asset.prices.dates.size() - 1);
  nlohmann::json draws = nlohmann::json::array();
  for (const auto& d : b.search.draws)
    draws.push_back({{"draw", d.draw},
                     {"w_bull", d.w_bull},
                     {"w_bear", d.w_bear},
                     {"asr", opt(d.asr)},
                     {"annual_return", d.annual_return}});
  nlohmann::json j{
      {"asset", asset.prices.asset_id},
      {"asset_class", std::string(to_string(asset.prices.asset_class))},
      {"model", std::string(to_string(b.model))},
      {"seed", cfg.seed},
      {"backtest_seed", cfg.backtest.seed},
      {"msr", to_json(b.msr)},
      {"policy",
       {{"w_bull", b.search.policy.w_bull},
        {"w_bear", b.search.policy.w_bear},
        {"bear_mode", std::string(to_string(b.search.policy.bear_mode))}}},
      {"select_by", std::string(to_string(cfg.backtest.select_by))},
      {"best_draw", b.search.best_draw},
      {"fell_back_to_returns", b.search.fell_back_to_returns},
      {"costs",
       {{"brokerage_pct", cfg.costs[asset.prices.asset_class].brokerage_pct},
        {"spread_pct", cfg.costs[asset.prices.asset_class].spread_pct},
        {"impact_pct", cfg.costs[asset.prices.asset_class].impact_pct},
        {"total_pct", cfg.costs[asset.prices.asset_class].total_pct()}}},
      {"train_start", ret_dates.front().iso()},
      {"test_start", ret_dates[b.test_begin].iso()},
      {"train", metrics_json(b.train, ret_dates, 0)},
      {"test", metrics_json(b.test, ret_dates, b.test_begin)},
      {"draws", draws},
  };
  j["kama"] = b.kama ? to_json(*b.kama) : nlohmann::json(nullptr);
  return j;
}

std::string equity_csv(const BacktestOutcome& b, const PreparedAsset& asset) {
  std::string s = "date,partition,weight,asset_return,cash_return,portfolio_return,cost,equity\n";
  double log_wealth = 0.0;
  for (std::size_t j = 0; j < asset.asset_log.size(); ++j) {
    const bool train = j < b.test_begin;
    const BacktestResult& r = train ? b.train : b.test;
    const std::size_t k = train ? j : j - b.test_begin;
    log_wealth += r.daily_returns[k];
    s += asset.prices.dates[j + 1].iso() + (train ? ",train," : ",test,") + num(b.weights[j]) + "," +
         num(asset.asset_log[j]) + "," + num(asset.cash_log[j]) + "," + num(r.daily_returns[k]) + "," +
         num(r.daily_costs[k]) + "," + num(std::exp(log_wealth)) + "\n";
  }
  return s;
}

std::string positions_csv(const BacktestOutcome& b, const PreparedAsset& asset) {
  const auto targets = target_weights(b.track.activity, b.search.policy);
  std::string s = "date,activity,target_weight,held_weight\n";
  for (std::size_t d = 0; d < targets.size(); ++d)
    s += asset.prices.dates[d].iso() + "," + std::to_string(b.track.activity[d]) + "," + num(targets[d]) + "," +
         num(d == 0 ? 0.0 : b.weights[d - 1]) + "\n";
  return s;
}

std::string track_labels_csv(const BacktestOutcome& b, const PreparedAsset& asset) {
  std::string s = "date,p_low,label\n";
  const auto& d = asset.prices.dates;
  for (std::size_t t = 0; t < d.size(); ++t) {
    const std::string_view l =
        b.model == ModelId::KamaMsr ? to_string(b.track.labels[t]) : state_name(b.track.states[t]);
    s += d[t].iso() + "," + num(b.track.p_low[t]) + "," + std::string(l) + "\n";
  }
  return s;
}

nlohmann::json comparison_json(std::span<const AssetComparison> assets, std::span<const ClassSummary> classes) {
  auto per_model = [](const std::array<double, 3>& v) {
    nlohmann::json o;
    for (std::size_t m = 0; m < kAllModels.size(); ++m) o[std::string(to_string(kAllModels[m]))] = finite_or_null(v[m]);
    return o;
  };
  auto ws = [](const WinningScore& w) {
    return nlohmann::json{{"winner", w.winner < 0 ? nlohmann::json(nullptr)
                                                  : nlohmann::json(std::string(to_string(kAllModels[w.winner])))},
                          {"ws", w.ws}};
  };
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : assets)
    a.push_back({{"asset", c.asset_id},
                 {"asset_class", std::string(to_string(c.asset_class))},
                 {"annual_return", per_model(c.annual_returns)},
                 {"asr", per_model(c.asr)},
                 {"ws_returns", ws(c.ws_returns)},
                 {"ws_asr", ws(c.ws_asr)},
                 {"combined", per_model(c.combined)}});
  nlohmann::json cl = nlohmann::json::array();
  for (const auto& c : classes)
    cl.push_back({{"asset_class", std::string(to_string(c.asset_class))},
                  {"n_assets", c.n_assets},
                  {"asr_ws", per_model(c.asr_ws)},
                  {"returns_ws", per_model(c.returns_ws)},
                  {"combined", per_model(c.combined)}});
  return {{"partition", "test"}, {"assets", a}, {"classes", cl}};
}

std::string comparison_csv(std::span<const AssetComparison> assets, std::span<const ClassSummary> classes) {
  std::string s = "block,scope,asset_class,n_assets";
  for (ModelId m : kAllModels) s += "," + std::string(to_string(m));
  s += "\n";
  auto row = [&](const char* block, const std::string& scope, AssetClass cls, int n, const std::array<double, 3>& v) {
    s += std::string(block) + "," + scope + "," + std::string(to_string(cls)) + "," + std::to_string(n);
    for (double x : v) s += "," + num(x);
    s += "\n";
  };
  for (const auto& c : classes) row("asr_ws", "class", c.asset_class, c.n_assets, c.asr_ws);
  for (const auto& c : classes) row("returns_ws", "class", c.asset_class, c.n_assets, c.returns_ws);
  for (const auto& c : classes) row("combined", "class", c.asset_class, c.n_assets, c.combined);
  for (const auto& a : assets) {
    row("asr_ws", a.asset_id, a.asset_class, 1, a.attributed_asr);
    row("returns_ws", a.asset_id, a.asset_class, 1, a.attributed_returns);
    row("combined", a.asset_id, a.asset_class, 1, a.combined);
  }
  return s;
}

}  // namespace kamamsr::report

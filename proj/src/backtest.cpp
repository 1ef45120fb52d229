#include "kamamsr/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace kamamsr {

namespace {

double mean_of(std::span<const double> v, std::size_t b, std::size_t e) {
  double s = 0.0;
  for (std::size_t i = b; i <= e; ++i) s += v[i];
  return s / static_cast<double>(e - b + 1);
}
}  // namespace

CostSchedule CostSchedule::defaults() {
  CostSchedule c;
  c[AssetClass::Equities] = {0.14, 0.13, 0.53};
  c[AssetClass::Currencies] = {0.0, 0.13, 0.0};
  c[AssetClass::Commodities] = {0.14, 0.13, 0.0};
  c[AssetClass::FixedIncome] = {0.14, 0.13, 0.53};
  c[AssetClass::Cash] = {0.0, 0.0, 0.0};
  return c;
}

const ClassCosts& CostSchedule::operator[](AssetClass c) const {
  return by_class_[static_cast<std::size_t>(c)];
}
ClassCosts& CostSchedule::operator[](AssetClass c) { return by_class_[static_cast<std::size_t>(c)]; }

std::string_view to_string(ModelId m) {
  switch (m) {
    case ModelId::KamaMsr: return "kama_msr";
    case ModelId::Msr2S: return "msr2s";
    case ModelId::Msr3Sto2S: return "msr3s_to_2s";
  }
  return "?";
}

ModelId model_id_from_string(std::string_view s) {
  for (ModelId m : kAllModels)
    if (to_string(m) == s) return m;
  if (s == "KamaMsr") return ModelId::KamaMsr;
  if (s == "Msr2S") return ModelId::Msr2S;
  if (s == "Msr3Sto2S") return ModelId::Msr3Sto2S;
  throw std::invalid_argument("unknown model id: " + std::string(s));
}

std::string_view to_string(BearMode m) { return m == BearMode::Short ? "short" : "cash"; }
BearMode bear_mode_from_string(std::string_view s) {
  if (s == "short") return BearMode::Short;
  if (s == "cash") return BearMode::Cash;
  throw std::invalid_argument("unknown bear mode: " + std::string(s));
}

std::string_view to_string(SelectBy s) { return s == SelectBy::Asr ? "asr" : "returns"; }
SelectBy select_by_from_string(std::string_view s) {
  if (s == "asr") return SelectBy::Asr;
  if (s == "returns") return SelectBy::Returns;
  throw std::invalid_argument("unknown select_by: " + std::string(s));
}

std::vector<int> activity_from_labels(std::span<const RegimeLabel> labels) {
  std::vector<int> a(labels.size(), 0);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] == RegimeLabel::LowVarBull) a[t] = 1;
    else if (labels[t] == RegimeLabel::HighVarBear) a[t] = -1;
  }
  return a;
}

std::vector<int> activity_from_states(std::span<const int> states) {
  std::vector<int> a(states.size(), 0);
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (states[t] < -1 || states[t] > 1)
      throw std::invalid_argument("activity_from_states: unknown state " + std::to_string(states[t]));
    a[t] = states[t] == 0 ? 1 : 0;
  }
  return a;
}

std::vector<double> target_weights(std::span<const int> activity, const StrategyPolicy& policy) {
  std::vector<double> w(activity.size(), 0.0);
  for (std::size_t t = 0; t < activity.size(); ++t) {
    if (activity[t] > 0) w[t] = policy.w_bull;
    else if (activity[t] < 0 && policy.bear_mode == BearMode::Short) w[t] = -policy.w_bear;
  }
  return w;
}

std::vector<double> lag_positions(std::span<const double> targets) {
  std::vector<double> w(targets.size(), 0.0);
  for (std::size_t t = 1; t < targets.size(); ++t) w[t] = targets[t - 1];
  return w;
}

std::vector<double> positions_from_labels(std::span<const RegimeLabel> labels,
                                          const StrategyPolicy& policy) {
  return lag_positions(target_weights(activity_from_labels(labels), policy));
}

std::vector<double> positions_from_states(std::span<const int> states,
                                          const StrategyPolicy& policy) {
  return lag_positions(target_weights(activity_from_states(states), policy));
}

std::vector<DayRange> runs(std::span<const int> codes) {
  std::vector<DayRange> out;
  std::size_t t = 0;
  while (t < codes.size()) {
    std::size_t e = t;
    while (e + 1 < codes.size() && codes[e + 1] == codes[t]) ++e;
    out.push_back({t, e});
    t = e + 1;
  }
  return out;
}

std::vector<DayRange> day_ranges(std::span<const Segment> segments) {
  std::vector<DayRange> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back({s.start_index, s.end_index});
  return out;
}

BacktestResult portfolio_returns(std::span<const double> asset_log, std::span<const double> cash_log,
                                 std::span<const double> weights, const ClassCosts& costs,
                                 double initial_weight) {
  if (asset_log.size() != cash_log.size() || asset_log.size() != weights.size())
    throw std::invalid_argument("portfolio_returns: misaligned inputs");
  const double per_side = costs.per_side_fraction();
  BacktestResult r;
  r.daily_returns.resize(asset_log.size());
  r.daily_costs.resize(asset_log.size());
  double prev = initial_weight;
  for (std::size_t t = 0; t < asset_log.size(); ++t) {
    const double w = weights[t];
    const double gross = w * std::expm1(asset_log[t]) + (1.0 - std::abs(w)) * std::expm1(cash_log[t]);
    const double traded = std::abs(w - prev);
    const double cost = traded * per_side;
    const double net = gross - cost;
    if (!(net > -1.0)) throw std::domain_error("portfolio_returns: wealth wiped out on day " + std::to_string(t));
    r.daily_returns[t] = std::log1p(net);
    r.daily_costs[t] = cost;
    r.turnover += traded;
    r.cost_drag += cost;
    prev = w;
  }
  return r;
}

BacktestResult portfolio_returns(std::span<const double> asset_log, std::span<const double> cash_log,
                                 std::span<const double> weights, const CostSchedule& costs,
                                 AssetClass asset_class, double initial_weight) {
  return portfolio_returns(asset_log, cash_log, weights, costs[asset_class], initial_weight);
}

std::vector<SegmentMetrics> segment_metrics(std::span<const double> daily,
                                            std::span<const DayRange> ranges) {
  std::vector<SegmentMetrics> out;
  out.reserve(ranges.size());
  for (const auto& rg : ranges) {
    if (rg.start > rg.end || rg.end >= daily.size())
      throw std::invalid_argument("segment range outside the return track");
    out.push_back({rg.start, rg.end, rg.n_days(), mean_of(daily, rg.start, rg.end) * kTradingDaysPerYear});
  }
  return out;
}

double weighted_annual_return(std::span<const double> daily, std::span<const DayRange> ranges) {
  const auto metrics = segment_metrics(daily, ranges);
  double days = 0.0, acc = 0.0;
  for (const auto& m : metrics) {
    days += static_cast<double>(m.n_days);
    acc += static_cast<double>(m.n_days) * m.annual_return;
  }
  if (days == 0.0) throw std::invalid_argument("weighted_annual_return: no covered days");
  return acc / days;
}

double adjusted_sharpe_closed_form(double mar, double mar_plus, double sigma) {
  return mar * std::pow(sigma, -mar / mar_plus);
}

AsrResult adjusted_sharpe(std::span<const double> r) {
  AsrResult a;
  if (r.size() < 2) return a;
  const double n = static_cast<double>(r.size());
  double mean = 0.0, pos = 0.0;
  std::size_t npos = 0;
  for (double v : r) {
    mean += v;
    if (v > 0.0) {
      pos += v;
      ++npos;
    }
  }
  mean /= n;
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  a.mar = mean * kTradingDaysPerYear;
  a.sigma = sd * std::sqrt(kTradingDaysPerYear);
  if (!(a.sigma > 0.0)) return a;
  if (npos == 0) {
    a.no_positive_returns = true;
    a.value = a.mar / a.sigma;
    return a;
  }
  a.mar_plus = pos / static_cast<double>(npos) * kTradingDaysPerYear;
  if (npos == r.size()) a.mar_plus = a.mar;  // same mean, identical rounding
  a.value = adjusted_sharpe_closed_form(a.mar, *a.mar_plus, a.sigma);
  return a;
}

void score(BacktestResult& result, std::span<const DayRange> ranges) {
  const auto& d = result.daily_returns;
  if (d.empty()) throw std::invalid_argument("score: empty return track");
  result.whole_period_annual_return = mean_of(d, 0, d.size() - 1) * kTradingDaysPerYear;
  if (ranges.empty()) {
    result.weighted_annual_return = result.whole_period_annual_return;
    result.per_segment.clear();
  } else {
    result.per_segment = segment_metrics(d, ranges);
    result.weighted_annual_return = weighted_annual_return(d, ranges);
  }
  result.asr = adjusted_sharpe(d);
}

std::pair<double, double> draw_weights(std::uint64_t seed, int draw) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(draw)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double bull = u(rng);
  const double bear = u(rng);
  return {bull, bear};
}

WeightSearch optimize_weights(std::span<const double> asset_log, std::span<const double> cash_log,
                              std::span<const int> activity, std::span<const DayRange> ranges,
                              const StrategyPolicy& skeleton, const ClassCosts& costs,
                              const OptimizeConfig& cfg, Execution exec) {
  if (cfg.n_draws < 1) throw std::invalid_argument("optimize_weights: n_draws must be >= 1");
  if (activity.size() != asset_log.size())
    throw std::invalid_argument("optimize_weights: activity misaligned with returns");

  WeightSearch ws;
  ws.draws.resize(static_cast<std::size_t>(cfg.n_draws));
  const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (int d = 0; d < cfg.n_draws; ++d) {
    StrategyPolicy p = skeleton;
    std::tie(p.w_bull, p.w_bear) = draw_weights(cfg.seed, d);
    BacktestResult r = portfolio_returns(asset_log, cash_log, target_weights(activity, p), costs);
    score(r, ranges);
    ws.draws[d] = WeightDraw{d, p.w_bull, p.w_bear, r.asr.value, r.weighted_annual_return};
  }

  int best = -1;
  if (cfg.select_by == SelectBy::Asr) {
    for (int d = 0; d < cfg.n_draws; ++d) {
      const auto& v = ws.draws[d].asr;
      if (v && (best < 0 || *v > *ws.draws[best].asr)) best = d;
    }
    ws.fell_back_to_returns = best < 0;
  }
  if (best < 0) {
    best = 0;
    for (int d = 1; d < cfg.n_draws; ++d)
      if (ws.draws[d].annual_return > ws.draws[best].annual_return) best = d;
  }
  ws.best_draw = best;
  ws.policy = skeleton;
  ws.policy.w_bull = ws.draws[best].w_bull;
  ws.policy.w_bear = ws.draws[best].w_bear;
  return ws;
}

WinningScore winning_score(std::span<const double> scores) {
  if (scores.size() < 2) throw std::invalid_argument("winning_score: need at least 2 models");
  WinningScore out;
  int runner = -1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    const int ii = static_cast<int>(i);
    if (out.winner < 0 || scores[i] > scores[out.winner]) {
      runner = out.winner;
      out.winner = ii;
    } else if (runner < 0 || scores[i] > scores[runner]) {
      runner = ii;
    }
  }
  if (out.winner < 0 || runner < 0) return out;
  const double best = scores[out.winner];
  const double second = scores[runner];
  if (best > 0.0 && best != second) out.ws = (best - second) / best;
  return out;
}

double combined_score(double ws_returns, double ws_asr) { return 0.5 * (ws_returns + ws_asr); }

AssetComparison compare_asset(std::string asset_id, AssetClass asset_class,
                              const std::array<double, 3>& annual_returns,
                              const std::array<double, 3>& asr) {
  AssetComparison c;
  c.asset_id = std::move(asset_id);
  c.asset_class = asset_class;
  c.annual_returns = annual_returns;
  c.asr = asr;
  c.ws_returns = winning_score(annual_returns);
  c.ws_asr = winning_score(asr);
  for (int m = 0; m < 3; ++m) {
    c.attributed_returns[m] = c.ws_returns.winner == m ? c.ws_returns.ws : 0.0;
    c.attributed_asr[m] = c.ws_asr.winner == m ? c.ws_asr.ws : 0.0;
    c.combined[m] = combined_score(c.attributed_returns[m], c.attributed_asr[m]);
  }
  return c;
}

std::vector<ClassSummary> aggregate_by_class(std::span<const AssetComparison> assets) {
  std::vector<ClassSummary> out;
  for (AssetClass cls : {AssetClass::Equities, AssetClass::Currencies, AssetClass::Commodities,
                         AssetClass::FixedIncome, AssetClass::Cash}) {
    ClassSummary s;
    s.asset_class = cls;
    for (const auto& a : assets) {
      if (a.asset_class != cls) continue;
      ++s.n_assets;
      for (int m = 0; m < 3; ++m) {
        s.asr_ws[m] += a.attributed_asr[m];
        s.returns_ws[m] += a.attributed_returns[m];
        s.combined[m] += a.combined[m];
      }
    }
    if (s.n_assets == 0) continue;
    for (int m = 0; m < 3; ++m) {
      s.asr_ws[m] /= s.n_assets;
      s.returns_ws[m] /= s.n_assets;
      s.combined[m] /= s.n_assets;
    }
    out.push_back(s);
  }
  return out;
}

nlohmann::json to_json(const CostSchedule& c) {
  nlohmann::json j;
  for (AssetClass cls : {AssetClass::Equities, AssetClass::Currencies, AssetClass::Commodities,
                         AssetClass::FixedIncome, AssetClass::Cash}) {
    const auto& k = c[cls];
    j[std::string(to_string(cls))] = {{"brokerage_pct", k.brokerage_pct},
                                      {"spread_pct", k.spread_pct},
                                      {"impact_pct", k.impact_pct},
                                      {"total_pct", k.total_pct()}};
  }
  return j;
}

CostSchedule cost_schedule_from_json(const nlohmann::json& j, CostSchedule base) {
  for (const auto& [key, v] : j.items()) {
    ClassCosts& k = base[asset_class_from_string(key)];
    k.brokerage_pct = v.value("brokerage_pct", k.brokerage_pct);
    k.spread_pct = v.value("spread_pct", k.spread_pct);
    k.impact_pct = v.value("impact_pct", k.impact_pct);
    if (k.brokerage_pct < 0 || k.spread_pct < 0 || k.impact_pct < 0)
      throw std::invalid_argument("costs must be non-negative");
  }
  return base;
}

}  // namespace kamamsr

#include "kamamsr/regime.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "kamamsr/market_data.hpp"

namespace kamamsr {

std::string_view to_string(RegimeLabel l) {
  switch (l) {
    case RegimeLabel::LowVarBull: return "low_var_bull";
    case RegimeLabel::LowVarBear: return "low_var_bear";
    case RegimeLabel::HighVarBull: return "high_var_bull";
    case RegimeLabel::HighVarBear: return "high_var_bear";
    case RegimeLabel::Undefined: break;
  }
  return "undefined";
}

RegimeLabel regime_label_from_string(std::string_view s) {
  for (auto l : {RegimeLabel::LowVarBull, RegimeLabel::LowVarBear, RegimeLabel::HighVarBull,
                 RegimeLabel::HighVarBear, RegimeLabel::Undefined})
    if (to_string(l) == s) return l;
  throw std::invalid_argument("unknown regime label: " + std::string(s));
}

int label_index(RegimeLabel l) {
  if (l == RegimeLabel::Undefined) throw std::invalid_argument("label_index: Undefined label");
  return static_cast<int>(l);
}

std::vector<RegimeLabel> label_days(std::span<const double> p_low,
                                    std::span<const TrendSignal> signals, double threshold) {
  if (p_low.size() != signals.size())
    throw std::invalid_argument("label_days: probability and signal tracks are misaligned");
  std::vector<RegimeLabel> out(p_low.size(), RegimeLabel::Undefined);
  for (std::size_t t = 0; t < p_low.size(); ++t) {
    if (std::isnan(p_low[t]) || signals[t] == TrendSignal::Undefined) continue;
    const bool low = p_low[t] > threshold;
    const bool bull = signals[t] == TrendSignal::Bullish;
    if (low) out[t] = bull ? RegimeLabel::LowVarBull : RegimeLabel::LowVarBear;
    else out[t] = bull ? RegimeLabel::HighVarBull : RegimeLabel::HighVarBear;
  }
  return out;
}

std::vector<Segment> segment(std::span<const RegimeLabel> labels) {
  std::vector<Segment> out;
  std::size_t t = 0;
  while (t < labels.size()) {
    if (labels[t] == RegimeLabel::Undefined) {
      ++t;
      continue;
    }
    std::size_t e = t;
    while (e + 1 < labels.size() && labels[e + 1] == labels[t]) ++e;
    Segment s;
    s.start_index = t;
    s.end_index = e;
    s.label = labels[t];
    s.n_days = e - t + 1;
    out.push_back(s);
    t = e + 1;
  }
  return out;
}

Segment segment_features(std::span<const double> closes, Segment seg) {
  if (seg.end_index >= closes.size() || seg.start_index > seg.end_index)
    throw std::invalid_argument("segment_features: segment outside the price series");
  const std::size_t n = seg.end_index - seg.start_index + 1;
  seg.n_days = n;
  seg.slope = 0.0;
  seg.volatility = 0.0;
  seg.short_segment = n < 3;

  if (n >= 2) {
    // OLS of ln(close) on 0..n-1
    const double xbar = (static_cast<double>(n) - 1.0) / 2.0;
    double ybar = 0.0;
    for (std::size_t i = 0; i < n; ++i) ybar += std::log(closes[seg.start_index + i]);
    ybar /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = static_cast<double>(i) - xbar;
      sxy += dx * (std::log(closes[seg.start_index + i]) - ybar);
      sxx += dx * dx;
    }
    seg.slope = sxy / sxx;
  }
  if (n >= 3) {
    const std::size_t m = n - 1;
    double mean = 0.0;
    for (std::size_t i = 1; i < n; ++i)
      mean += std::log(closes[seg.start_index + i] / closes[seg.start_index + i - 1]);
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double d = std::log(closes[seg.start_index + i] / closes[seg.start_index + i - 1]) - mean;
      ss += d * d;
    }
    seg.volatility = std::sqrt(ss / static_cast<double>(m - 1)) * std::sqrt(kTradingDaysPerYear);
  }
  return seg;
}

std::vector<Segment> segment_features(std::span<const double> closes,
                                      std::vector<Segment> segments) {
  for (auto& s : segments) s = segment_features(closes, s);
  return segments;
}

std::vector<double> align_to_price_days(const ProbMatrix& probs, int column, std::size_t n_prices,
                                        std::size_t first_day) {
  if (column < 0 || column >= probs.cols())
    throw std::invalid_argument("align_to_price_days: bad column");
  if (static_cast<std::size_t>(probs.rows()) + first_day > n_prices)
    throw std::invalid_argument("align_to_price_days: more rows than price days");
  std::vector<double> out(n_prices, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) out[r + first_day] = probs(r, column);
  return out;
}

}  // namespace kamamsr

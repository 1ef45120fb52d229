#include "kamamsr/kama.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace kamamsr {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string_view to_string(CoefficientForm f) {
  return f == CoefficientForm::Conventional ? "conventional" : "as_printed";
}

CoefficientForm coefficient_form_from_string(std::string_view s) {
  if (s == "conventional" || s == "Conventional") return CoefficientForm::Conventional;
  if (s == "as_printed" || s == "AsPrinted") return CoefficientForm::AsPrinted;
  throw std::invalid_argument("unknown coefficient form: " + std::string(s));
}

std::string_view to_string(SellReference r) { return r == SellReference::Low ? "low" : "high"; }

SellReference sell_reference_from_string(std::string_view s) {
  if (s == "low") return SellReference::Low;
  if (s == "high") return SellReference::High;
  throw std::invalid_argument("unknown sell reference: " + std::string(s));
}

std::string_view to_string(TrendSignal s) {
  switch (s) {
    case TrendSignal::Bullish: return "bullish";
    case TrendSignal::Bearish: return "bearish";
    case TrendSignal::Undefined: break;
  }
  return "undefined";
}

void KamaParams::validate() const {
  if (n < 2) throw std::invalid_argument("KamaParams: n must be >= 2");
  if (n_s < 2 || n_s >= n_l) throw std::invalid_argument("KamaParams: need 2 <= n_s < n_l");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("KamaParams: gamma must be positive");
}

std::vector<double> efficiency_ratio(std::span<const double> closes, int n) {
  if (n < 2) throw std::invalid_argument("efficiency_ratio: n must be >= 2");
  const auto w = static_cast<std::size_t>(n);
  if (closes.size() <= w) throw std::invalid_argument("efficiency_ratio: series too short");
  std::vector<double> er(closes.size(), kNaN);
  for (std::size_t t = w; t < closes.size(); ++t) {
    double path = 0.0;
    for (std::size_t i = t - w + 1; i <= t; ++i) path += std::abs(closes[i] - closes[i - 1]);
    const double net = std::abs(closes[t] - closes[t - w]);
    // rounding can push net a hair above path on a monotone run
    er[t] = path > 0.0 ? std::min(1.0, net / path) : 0.0;
  }
  return er;
}

double smoothing_coefficient(double er, const KamaParams& params) {
  const double ks = smoothing_constant(params.n_s);
  const double kl = smoothing_constant(params.n_l);
  const double base = params.coefficient_form == CoefficientForm::Conventional ? kl : ks;
  const double c = er * (ks - kl) + base;
  return c * c;
}

std::vector<double> filter_series(std::span<const double> kama, int n, double gamma) {
  if (n < 2) throw std::invalid_argument("filter_series: n must be >= 2");
  const auto w = static_cast<std::size_t>(n);
  std::vector<double> f(kama.size(), kNaN);
  std::vector<double> x(w);
  for (std::size_t t = w; t < kama.size(); ++t) {
    bool ok = true;
    for (std::size_t i = 0; i < w && ok; ++i) {
      const std::size_t s = t - w + 1 + i;
      x[i] = kama[s] - kama[s - 1];
      ok = std::isfinite(x[i]);
    }
    if (!ok) continue;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(w);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    f[t] = gamma * std::sqrt(ss / static_cast<double>(w - 1));
  }
  return f;
}

KamaSeries kama_series(std::span<const double> closes, const KamaParams& params) {
  params.validate();
  const auto n = static_cast<std::size_t>(params.n);
  if (closes.size() <= n || closes.size() <= static_cast<std::size_t>(params.n_l))
    throw std::invalid_argument("kama_series: series too short for n=" + std::to_string(params.n) +
                                ", n_l=" + std::to_string(params.n_l));

  KamaSeries s;
  s.er = efficiency_ratio(closes, params.n);
  s.kama.assign(closes.size(), kNaN);
  double seed = 0.0;
  for (std::size_t i = 0; i <= n; ++i) seed += closes[i];
  s.kama[n] = seed / static_cast<double>(n + 1);
  for (std::size_t t = n + 1; t < closes.size(); ++t) {
    const double c = smoothing_coefficient(s.er[t], params);
    s.kama[t] = s.kama[t - 1] + c * (closes[t] - s.kama[t - 1]);
  }
  s.filter = filter_series(s.kama, params.n, params.gamma);
  s.warmup_end = closes.size();
  for (std::size_t t = 0; t < closes.size(); ++t) {
    if (std::isfinite(s.kama[t]) && std::isfinite(s.er[t]) && std::isfinite(s.filter[t])) {
      s.warmup_end = t;
      break;
    }
  }
  return s;
}

KamaSeries kama_series(const PriceSeries& prices, const KamaParams& params) {
  KamaSeries s = kama_series(std::span<const double>(prices.closes), params);
  s.dates = prices.dates;
  return s;
}

std::vector<TrendSignal> trend_signals(const KamaSeries& series, const KamaParams& params) {
  const auto n = static_cast<std::size_t>(params.n);
  const auto len = series.kama.size();
  std::vector<TrendSignal> out(len, TrendSignal::Undefined);
  TrendSignal state = TrendSignal::Undefined;
  for (std::size_t t = std::max(series.warmup_end, n); t < len; ++t) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    bool ok = std::isfinite(series.filter[t]) && std::isfinite(series.kama[t]);
    for (std::size_t i = t - n; i < t && ok; ++i) {
      ok = std::isfinite(series.kama[i]);
      lo = std::min(lo, series.kama[i]);
      hi = std::max(hi, series.kama[i]);
    }
    if (ok) {
      const double k = series.kama[t];
      const double f = series.filter[t];
      const bool buy = k - lo > f;
      const double ref = params.sell_reference == SellReference::Low ? lo : hi;
      const bool sell = ref - k > f;
      // both can only fire together under the high reference; keep the state then
      if (buy && !sell) state = TrendSignal::Bullish;
      else if (sell && !buy) state = TrendSignal::Bearish;
    }
    out[t] = state;
  }
  return out;
}

}  // namespace kamamsr

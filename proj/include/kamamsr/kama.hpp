#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "kamamsr/market_data.hpp"

namespace kamamsr {

// Conventional: C = [ER (k_s - k_l) + k_l]^2, slow in chop, fast in trend.
// AsPrinted:    C = [ER (k_s - k_l) + k_s]^2.
enum class CoefficientForm { Conventional, AsPrinted };

// Reference level for the sell trigger: the prior-window KAMA low, or
// the prior-window high (Kaufman's usual rule).
enum class SellReference { Low, High };

std::string_view to_string(CoefficientForm f);
CoefficientForm coefficient_form_from_string(std::string_view s);
std::string_view to_string(SellReference r);
SellReference sell_reference_from_string(std::string_view s);

struct KamaParams {
  int n = 10;     // ER window, filter window, prior-extreme lookback
  int n_s = 2;    // fast smoothing window
  int n_l = 30;   // slow smoothing window
  double gamma = 1.0;
  CoefficientForm coefficient_form = CoefficientForm::Conventional;
  SellReference sell_reference = SellReference::Low;

  void validate() const;  // throws std::invalid_argument
};

// k = 2 / (window + 1)
constexpr double smoothing_constant(int window) { return 2.0 / (window + 1.0); }

// Tracks are the length of the price series; undefined entries are NaN.
struct KamaSeries {
  std::vector<Date> dates;
  std::vector<double> kama;
  std::vector<double> er;
  std::vector<double> filter;
  std::size_t warmup_end = 0;  // first index where kama, er and filter exist
};

enum class TrendSignal { Undefined, Bullish, Bearish };
std::string_view to_string(TrendSignal s);

// ER_t = |P_t - P_{t-n}| / sum_{i=t-n+1..t} |P_i - P_{i-1}|, 0 when the
// path length is 0. NaN for t < n.
std::vector<double> efficiency_ratio(std::span<const double> closes, int n);

double smoothing_coefficient(double er, const KamaParams& params);

// Seeded at index n with the mean of closes[0..n]. Requires more than
// max(n, n_l) closes.
KamaSeries kama_series(std::span<const double> closes, const KamaParams& params);
KamaSeries kama_series(const PriceSeries& prices, const KamaParams& params);

// gamma * sample std (divisor n-1) of the last n KAMA increments. NaN
// until n increments exist.
std::vector<double> filter_series(std::span<const double> kama, int n, double gamma);

// Persistent buy/sell state machine evaluated from warmup_end onward.
std::vector<TrendSignal> trend_signals(const KamaSeries& series, const KamaParams& params);

}  // namespace kamamsr

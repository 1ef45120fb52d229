#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "kamamsr/kama.hpp"
#include "kamamsr/msr.hpp"

namespace kamamsr {

enum class RegimeLabel { LowVarBull, LowVarBear, HighVarBull, HighVarBear, Undefined };

std::string_view to_string(RegimeLabel l);
RegimeLabel regime_label_from_string(std::string_view s);
// Column index 0..3 for the four active labels.
int label_index(RegimeLabel l);

struct Segment {
  std::size_t start_index = 0;
  std::size_t end_index = 0;  // inclusive
  RegimeLabel label = RegimeLabel::Undefined;
  double slope = 0.0;       // OLS slope of ln(close) per day
  double volatility = 0.0;  // annualized std of daily log returns
  std::size_t n_days = 0;
  bool short_segment = false;  // too short for one of the features
};

// Day t is LowVar* when p_low[t] > threshold (strictly), HighVar*
// otherwise; the trend half comes from the signal. NaN probability or an
// Undefined signal gives Undefined.
std::vector<RegimeLabel> label_days(std::span<const double> p_low,
                                    std::span<const TrendSignal> signals,
                                    double threshold = 0.5);

// Maximal runs of equal labels, Undefined days excluded.
std::vector<Segment> segment(std::span<const RegimeLabel> labels);

Segment segment_features(std::span<const double> closes, Segment seg);
std::vector<Segment> segment_features(std::span<const double> closes,
                                      std::vector<Segment> segments);

// Spreads one probability column over price days: returns row r belongs
// to price day r + first_day, earlier days are NaN.
std::vector<double> align_to_price_days(const ProbMatrix& probs, int column,
                                        std::size_t n_prices, std::size_t first_day = 2);

}  // namespace kamamsr

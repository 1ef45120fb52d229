#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kamamsr {

enum class AssetClass { Equities, Currencies, Commodities, FixedIncome, Cash };

std::string_view to_string(AssetClass c);
// Accepts the enum spelling ("Equities") or a lower-case alias
// ("equities", "fx", "currencies", "commodities", "fixed_income", "cash").
AssetClass asset_class_from_string(std::string_view s);

// Calendar date; trading days are simply whatever dates a file contains.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static Date parse(std::string_view iso);  // YYYY-MM-DD, throws DataError
  std::string iso() const;
  bool valid() const;

  auto operator<=>(const Date&) const = default;
};

// `count` consecutive weekdays starting at `first` (or the next weekday).
std::vector<Date> business_days(Date first, std::size_t count);

struct PriceSeries {
  std::string asset_id;
  AssetClass asset_class = AssetClass::Equities;
  std::vector<Date> dates;
  std::vector<double> closes;

  std::size_t size() const { return closes.size(); }
  // Throws DataError when dates are not strictly increasing, a close is
  // not strictly positive, or the two columns differ in length.
  void validate() const;
};

// values[t] = ln(closes[t+1] / closes[t]); dates[t] = price dates[t+1].
struct ReturnSeries {
  std::vector<Date> dates;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

struct DataSplit {
  std::size_t train_end_index = 0;
  double train_fraction = 0.85;
};

struct TrainTest {
  PriceSeries train;
  PriceSeries test;
  DataSplit split;
};

struct LoadOptions {
  std::size_t min_series_length = 260;
};

inline constexpr double kTradingDaysPerYear = 252.0;
inline constexpr double kDefaultTrainFraction = 0.85;

PriceSeries parse_price_csv(std::istream& in, AssetClass asset_class,
                            std::string asset_id, const LoadOptions& opts = {});
PriceSeries load_csv(const std::filesystem::path& path, AssetClass asset_class,
                     const LoadOptions& opts = {});
void write_price_csv(const PriceSeries& prices, const std::filesystem::path& path);

ReturnSeries log_returns(const PriceSeries& prices);
std::vector<double> log_returns(std::span<const double> closes);

TrainTest split_train_test(const PriceSeries& prices,
                           double train_fraction = kDefaultTrainFraction);

PriceSeries synth_cash_index(std::span<const Date> dates, double annual_rate);

}  // namespace kamamsr

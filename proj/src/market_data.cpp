#include "kamamsr/market_data.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kamamsr/errors.hpp"

namespace kamamsr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

std::chrono::sys_days to_sys_days(const Date& d) {
  using namespace std::chrono;
  return sys_days{year{d.year} / month{static_cast<unsigned>(d.month)} /
                  day{static_cast<unsigned>(d.day)}};
}

Date from_sys_days(std::chrono::sys_days sd) {
  std::chrono::year_month_day ymd{sd};
  return Date{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
              static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

}  // namespace

std::string_view to_string(AssetClass c) {
  switch (c) {
    case AssetClass::Equities: return "Equities";
    case AssetClass::Currencies: return "Currencies";
    case AssetClass::Commodities: return "Commodities";
    case AssetClass::FixedIncome: return "FixedIncome";
    case AssetClass::Cash: return "Cash";
  }
  return "?";
}

AssetClass asset_class_from_string(std::string_view s) {
  if (s == "Equities" || s == "equities" || s == "equity") return AssetClass::Equities;
  if (s == "Currencies" || s == "currencies" || s == "fx" || s == "FX") return AssetClass::Currencies;
  if (s == "Commodities" || s == "commodities") return AssetClass::Commodities;
  if (s == "FixedIncome" || s == "fixed_income" || s == "fixedincome") return AssetClass::FixedIncome;
  if (s == "Cash" || s == "cash") return AssetClass::Cash;
  throw std::invalid_argument("unknown asset class: " + std::string(s));
}

Date Date::parse(std::string_view iso) {
  iso = trim(iso);
  Date d;
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-' || !parse_int(iso.substr(0, 4), d.year) ||
      !parse_int(iso.substr(5, 2), d.month) || !parse_int(iso.substr(8, 2), d.day) || !d.valid()) {
    throw DataError("invalid ISO-8601 date: '" + std::string(iso) + "'");
  }
  return d;
}

bool Date::valid() const {
  using namespace std::chrono;
  if (month < 1 || month > 12 || day < 1 || day > 31) return false;
  return year_month_day{std::chrono::year{year} / static_cast<unsigned>(month) /
                        static_cast<unsigned>(day)}
      .ok();
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::vector<Date> business_days(Date first, std::size_t count) {
  using namespace std::chrono;
  std::vector<Date> out;
  out.reserve(count);
  sys_days d = to_sys_days(first);
  while (out.size() < count) {
    const weekday wd{d};
    if (wd != Saturday && wd != Sunday) out.push_back(from_sys_days(d));
    d += days{1};
  }
  return out;
}

void PriceSeries::validate() const {
  if (dates.size() != closes.size())
    throw DataError("price series '" + asset_id + "': dates and closes differ in length");
  for (std::size_t i = 0; i < closes.size(); ++i) {
    if (!(closes[i] > 0.0) || !std::isfinite(closes[i]))
      throw DataError("price series '" + asset_id + "': non-positive close at index " +
                      std::to_string(i));
    if (i > 0 && !(dates[i - 1] < dates[i]))
      throw DataError("price series '" + asset_id + "': non-increasing date " + dates[i].iso() +
                      " at index " + std::to_string(i));
  }
}

PriceSeries parse_price_csv(std::istream& in, AssetClass asset_class, std::string asset_id,
                            const LoadOptions& opts) {
  PriceSeries out;
  out.asset_id = std::move(asset_id);
  out.asset_class = asset_class;

  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) throw DataError("empty price file");
  ++row;
  {
    auto header = trim(line);
    if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.remove_prefix(3);
    if (header != "date,close") throw DataError("expected header 'date,close', got '" + line + "'");
  }

  while (std::getline(in, line)) {
    ++row;
    const auto s = trim(line);
    if (s.empty()) continue;
    const auto comma = s.find(',');
    if (comma == std::string_view::npos || s.find(',', comma + 1) != std::string_view::npos)
      throw DataError("row " + std::to_string(row) + ": expected 'date,close'");
    Date d;
    try {
      d = Date::parse(s.substr(0, comma));
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(row) + ": " + e.what());
    }
    const auto value = trim(s.substr(comma + 1));
    double close = 0.0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), close);
    if (value.empty() || ec != std::errc{} || p != value.data() + value.size())
      throw DataError("row " + std::to_string(row) + ": missing or malformed close");
    if (!(close > 0.0) || !std::isfinite(close))
      throw DataError("row " + std::to_string(row) + ": close must be strictly positive");
    if (!out.dates.empty() && !(out.dates.back() < d))
      throw DataError("row " + std::to_string(row) + ": duplicate or non-increasing date " +
                      d.iso());
    out.dates.push_back(d);
    out.closes.push_back(close);
  }

  if (out.size() < opts.min_series_length)
    throw DataError("series has " + std::to_string(out.size()) + " valid rows, need at least " +
                    std::to_string(opts.min_series_length));
  return out;
}

PriceSeries load_csv(const std::filesystem::path& path, AssetClass asset_class,
                     const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read price file: " + path.string());
  try {
    return parse_price_csv(in, asset_class, path.stem().string(), opts);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_price_csv(const PriceSeries& prices, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "date,close\n";
  char buf[64];
  for (std::size_t i = 0; i < prices.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", prices.closes[i]);
    out << prices.dates[i].iso() << ',' << buf << '\n';
  }
}

std::vector<double> log_returns(std::span<const double> closes) {
  if (closes.size() < 2) throw std::invalid_argument("log_returns: need at least 2 prices");
  std::vector<double> r(closes.size() - 1);
  for (std::size_t t = 0; t + 1 < closes.size(); ++t) r[t] = std::log(closes[t + 1] / closes[t]);
  return r;
}

ReturnSeries log_returns(const PriceSeries& prices) {
  ReturnSeries out;
  out.values = log_returns(std::span<const double>(prices.closes));
  out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
  return out;
}

TrainTest split_train_test(const PriceSeries& prices, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  const auto n = prices.size();
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  if (cut == 0 || cut >= n)
    throw ConfigError("train/test split leaves an empty partition (N=" + std::to_string(n) + ")");

  TrainTest tt;
  tt.split = DataSplit{cut, train_fraction};
  auto part = [&](std::size_t b, std::size_t e) {
    PriceSeries p;
    p.asset_id = prices.asset_id;
    p.asset_class = prices.asset_class;
    p.dates.assign(prices.dates.begin() + b, prices.dates.begin() + e);
    p.closes.assign(prices.closes.begin() + b, prices.closes.begin() + e);
    return p;
  };
  tt.train = part(0, cut);
  tt.test = part(cut, n);
  return tt;
}

PriceSeries synth_cash_index(std::span<const Date> dates, double annual_rate) {
  if (annual_rate < 0.0) throw std::invalid_argument("cash index: negative rates are not supported");
  if (dates.empty()) throw std::invalid_argument("cash index: no dates");
  PriceSeries cash;
  cash.asset_id = "cash";
  cash.asset_class = AssetClass::Cash;
  cash.dates.assign(dates.begin(), dates.end());
  cash.closes.resize(dates.size());
  const double growth = std::pow(1.0 + annual_rate, 1.0 / kTradingDaysPerYear);
  cash.closes[0] = 100.0;
  for (std::size_t t = 1; t < dates.size(); ++t) cash.closes[t] = cash.closes[t - 1] * growth;
  cash.validate();
  return cash;
}

}  // namespace kamamsr

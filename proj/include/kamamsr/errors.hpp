#pragma once

#include <stdexcept>
#include <string>

namespace kamamsr {

// Bad or unreadable input data (files, rows, series contents).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent configuration or a request the data cannot satisfy
// (e.g. a training partition shorter than the KAMA warm-up).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kamamsr

#pragma once

#include <stdexcept>
#include <string>

namespace paint {

// Error taxonomy mirrors the CLI exit codes: usage=2, data=3, numeric=4.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violations (bad arguments to library functions).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

#define PAINT_CHECK(cond, msg)                      \
  do {                                              \
    if (!(cond)) throw ::paint::ContractError(msg); \
  } while (0)

#define PAINT_CHECK_DATA(cond, msg)             \
  do {                                          \
    if (!(cond)) throw ::paint::DataError(msg); \
  } while (0)

#define PAINT_CHECK_NUMERIC(cond, msg)             \
  do {                                             \
    if (!(cond)) throw ::paint::NumericError(msg); \
  } while (0)

}  // namespace paint

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pesaerl {

/// Coarse failure classes. The CLI maps each one to an exit code and a
/// machine-readable category string.
enum class ErrorCategory { config, input, numeric, budget, contract, io };

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::input: return "input";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::budget: return "budget";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::input: return 3;
    case ErrorCategory::numeric: return 4;
    case ErrorCategory::budget: return 5;
    case ErrorCategory::contract: return 6;
    case ErrorCategory::io: return 7;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCategory::config, w) {}
};
struct InputError : Error {
  explicit InputError(const std::string& w) : Error(ErrorCategory::input, w) {}
};
struct BudgetError : Error {
  explicit BudgetError(const std::string& w) : Error(ErrorCategory::budget, w) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorCategory::contract, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};

/// Non-finite value produced inside a computation. `layer` is the index of
/// the network layer (or -1 when not applicable).
class NumericError : public Error {
 public:
  NumericError(const std::string& w, int layer = -1)
      : Error(ErrorCategory::numeric, w), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

}  // namespace pesaerl

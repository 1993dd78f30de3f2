#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpdvmc {

// Categories double as CLI exit codes (offset by 10 so they never clash
// with shell conventions for 1/2).
enum class ErrorCategory : int {
  parse = 10,
  resource = 11,
  contract = 12,
  config = 13,
  numerical = 14,
  io = 15,
};

constexpr std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::resource: return "resource";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::config: return "config";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorCategory::parse, what) {}
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCategory::parse, "line " + std::to_string(line) + ": " + what) {}
};

struct ResourceError : Error {
  explicit ResourceError(const std::string& what) : Error(ErrorCategory::resource, what) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error(ErrorCategory::contract, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

}  // namespace cpdvmc

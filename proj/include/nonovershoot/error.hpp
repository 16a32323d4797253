#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nos {

enum class ErrorKind {
  InvalidArgument,
  NoRoot,
  Unbounded,
  Budget,
  DegenerateWeights,
  AllZeroWeights,
  Exhausted,
  AttemptsExhausted,
  OutOfRange,
  LatticeMisaligned,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NoRoot: return "NoRoot";
    case ErrorKind::Unbounded: return "Unbounded";
    case ErrorKind::Budget: return "Budget";
    case ErrorKind::DegenerateWeights: return "DegenerateWeights";
    case ErrorKind::AllZeroWeights: return "AllZeroWeights";
    case ErrorKind::Exhausted: return "Exhausted";
    case ErrorKind::AttemptsExhausted: return "AttemptsExhausted";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::LatticeMisaligned: return "LatticeMisaligned";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Root bracket could not be established; carries the interval that was tried.
class NoRootError : public Error {
 public:
  NoRootError(const std::string& what, double lo, double hi)
      : Error(ErrorKind::NoRoot, what + " (bracket tried: [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "])"),
        lo_(lo),
        hi_(hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_, hi_;
};

/// One or more replicas ran past their step cap.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, std::size_t exhausted)
      : Error(ErrorKind::Budget, what), exhausted_(exhausted) {}
  std::size_t exhausted() const noexcept { return exhausted_; }

 private:
  std::size_t exhausted_;
};

class AttemptsExhaustedError : public Error {
 public:
  AttemptsExhaustedError(std::size_t attempts, std::size_t accepted)
      : Error(ErrorKind::AttemptsExhausted,
              "rejection sampler accepted " + std::to_string(accepted) + " of " +
                  std::to_string(attempts) + " attempts"),
        attempts_(attempts),
        accepted_(accepted) {}
  std::size_t attempts() const noexcept { return attempts_; }
  double observed_rate() const noexcept {
    return attempts_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(attempts_);
  }

 private:
  std::size_t attempts_, accepted_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : Error(ErrorKind::Config, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace nos

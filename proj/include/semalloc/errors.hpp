#pragma once

#include <stdexcept>
#include <string>

namespace semalloc {

// Raised when a perception target cannot be met by any error level.
class InfeasibleError : public std::runtime_error {
 public:
  enum class Kind {
    TooStrict,          // needs less error than zero error can deliver
    SatisfiedAtMaxError // already met with maximal error, i.e. zero power
  };

  InfeasibleError(Kind kind, double achievable, const std::string& what)
      : std::runtime_error(what), kind_(kind), achievable_(achievable) {}

  Kind kind() const noexcept { return kind_; }
  // Best value reachable in the direction that failed.
  double achievable() const noexcept { return achievable_; }

 private:
  Kind kind_;
  double achievable_;
};

// A root search was given an interval without a sign change.
class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semalloc

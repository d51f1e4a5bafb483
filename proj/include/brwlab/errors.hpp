#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace brwlab {

/// Thrown when a caller breaks an operation's precondition (bad dimensions,
/// out-of-window vertex, invalid parameter).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure that is not the caller's fault: truncation too small,
/// series too short, witness assertion failing.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SeriesUnreliable : public NumericFailure {
 public:
  SeriesUnreliable(const std::string& what, double largest_reliable_lambda)
      : NumericFailure(what), largest_reliable_lambda_(largest_reliable_lambda) {}
  double largest_reliable_lambda() const noexcept { return largest_reliable_lambda_; }

 private:
  double largest_reliable_lambda_;
};

class WitnessFailure : public NumericFailure {
 public:
  WitnessFailure(const std::string& what, std::size_t worst_vertex, double margin)
      : NumericFailure(what), worst_vertex_(worst_vertex), margin_(margin) {}
  std::size_t worst_vertex() const noexcept { return worst_vertex_; }
  double margin() const noexcept { return margin_; }

 private:
  std::size_t worst_vertex_;
  double margin_;
};

}  // namespace brwlab

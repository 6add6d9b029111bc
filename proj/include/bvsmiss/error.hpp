#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bvsmiss {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CSV and dataset-invariant failures.
struct LoadError : Error {
  using Error::Error;
};

struct NotSpdError : Error {
  NotSpdError(std::size_t pivot, const std::string& what)
      : Error(what), pivot_index(pivot) {}
  std::size_t pivot_index;
};

// Argument outside the mathematical domain of an operation (df too small,
// sigma^2 <= 0, degenerate prior).
struct DomainError : Error {
  using Error::Error;
};

// Caller broke a documented precondition.
struct ContractError : Error {
  using Error::Error;
};

// Model whose centered design is rank deficient (or too large for n).
struct SingularModelError : Error {
  using Error::Error;
};

}  // namespace bvsmiss

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pipesim {

// Operand shapes do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller supplied an invalid size, encoding, or configuration value.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An internal scheduling or bookkeeping invariant was broken. Always a bug.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Training produced a non-finite loss.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(std::int64_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace pipesim

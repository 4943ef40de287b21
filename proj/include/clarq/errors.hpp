#pragma once

#include <stdexcept>
#include <string>

namespace clarq {

// Malformed input, dangling references, schema problems. Maps to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during scoring or training. Maps to exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// No unasked candidate remains.
class PoolExhausted : public std::runtime_error {
 public:
  PoolExhausted() : std::runtime_error("candidate pool is exhausted") {}
};

}  // namespace clarq

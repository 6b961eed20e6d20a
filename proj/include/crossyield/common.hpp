// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossyield {

using Vec = std::vector<double>;

/// Thrown on any dimension/shape violation. Shape bugs must never pass
/// silently, so there is no broadcasting anywhere in the library.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown on malformed input files, bad configs, out-of-range arguments.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

[[noreturn]] inline void shape_fail(const std::string& op, const std::string& msg) {
  throw ShapeError(op + ": " + msg);
}

inline std::string shape_str(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace detail

}  // namespace crossyield

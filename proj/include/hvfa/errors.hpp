#pragma once

#include <stdexcept>
#include <string>

namespace hvfa {

// Operand extents are incompatible (matmul inner dims, elementwise shapes).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A single operand has a shape the op cannot accept (odd grid extent,
// non-doubling pyramid).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain (nonpositive box extent).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is structurally valid but too small to process (empty document,
// grid finer than the image).
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid or inconsistent configuration (unknown variant, negative lambda,
// missing reconstruction decoder).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite evaluation, divergence, or a tolerance breach in a numeric check.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents or an I/O failure.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hvfa

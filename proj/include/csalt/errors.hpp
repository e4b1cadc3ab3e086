#pragma once

#include <stdexcept>
#include <string>

namespace csalt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

class InvalidInput : public Error {
  public:
    using Error::Error;
};

/// A column of the data has no ones, so its code length is undefined.
class EmptyColumn : public Error {
  public:
    explicit EmptyColumn(std::size_t column)
        : Error("column " + std::to_string(column) + " has no ones"),
          column_(column) {}
    std::size_t column() const noexcept { return column_; }

  private:
    std::size_t column_;
};

/// A gradient, step size or objective value became NaN or infinite.
class NonFiniteValue : public Error {
  public:
    using Error::Error;
};

/// Generator quotas or caps cannot be met for the requested dimensions.
class ConstraintInfeasible : public Error {
  public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
  public:
    using Error::Error;
};

} // namespace csalt

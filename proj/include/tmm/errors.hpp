#pragma once

#include <stdexcept>
#include <string>

namespace tmm {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, orders or extents that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A dense tensor would exceed the configured element budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or buffer contents.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; the message carries the offending key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Every class assigns zero density to the observed event.
class ZeroDensityError : public Error {
 public:
  using Error::Error;
};

/// Training produced non-finite losses for too long.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace tmm

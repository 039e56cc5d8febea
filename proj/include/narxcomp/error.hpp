#pragma once

#include <stdexcept>
#include <string>

namespace narxcomp {

// Base of every error raised by the library. Numeric failures derive from
// this; configuration problems use ConfigError so callers can tell them apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

class DegreeMismatch : public Error {
 public:
  using Error::Error;
};

class InsufficientHistory : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class DegenerateStatics : public Error {
 public:
  using Error::Error;
};

class NoStableFixedPoint : public Error {
 public:
  using Error::Error;
};

class OutOfLoopRange : public Error {
 public:
  using Error::Error;
};

class IdenticallyZero : public Error {
 public:
  using Error::Error;
};

class NoFeasibleRoot : public Error {
 public:
  using Error::Error;
};

class UnknownFutureInput : public Error {
 public:
  using Error::Error;
};

class UnsupportedStructure : public Error {
 public:
  using Error::Error;
};

class DegenerateRange : public Error {
 public:
  using Error::Error;
};

}  // namespace narxcomp

#pragma once

#include <stdexcept>
#include <string>

namespace gfv {

// Base for all library failures. Subclasses mirror the failure families the
// module contracts name; callers that only care about "gfv failed" can catch
// the base.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or layout mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An index (token id, position, target) outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// A value outside the operation's domain (bad class id, p_max >= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An API precondition was violated (backward on a non-scalar, missing grad).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Numerically invalid state (non-finite input, eigenvalue below tolerance).
class NumericError : public Error {
 public:
  using Error::Error;
};

// A serialized artifact violated its format (bad magic, payload size, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad key or value in a config file or flag set.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Two artifacts (checkpoint vs. config, checkpoint vs. checkpoint) disagree.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace gfv

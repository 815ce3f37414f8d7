#pragma once

#include <stdexcept>
#include <string>

namespace scan {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes or dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input outside the mathematical domain of an operation (e.g. log of a
// nonpositive value).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Token id outside the embedding vocabulary.
class VocabError : public Error {
 public:
  using Error::Error;
};

// Triplet mining could not find a candidate for some anchor.
class MiningError : public Error {
 public:
  using Error::Error;
};

// Class label out of range.
class LabelError : public Error {
 public:
  using Error::Error;
};

// Empty or otherwise unusable data (empty sequence, oversized subset, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// An API precondition was violated (e.g. gradient check on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes while reading a file; message carries the byte offset.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A loaded record violates a dataset invariant; message names the pair id.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad configuration: unknown key, unparsable value, inconsistent settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure; message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scan

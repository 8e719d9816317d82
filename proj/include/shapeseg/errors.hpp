#pragma once

#include <stdexcept>
#include <string>

namespace shapeseg {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside its documented domain (r_k < 1, flip rate >= 1, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Inputs are individually valid but inconsistent with each other
/// (mismatched dimensions, a non-symmetric kernel where one is required).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A geometric reduction was asked for on a mask with no set pixels.
class EmptyMaskError : public Error {
 public:
  EmptyMaskError() : Error("empty mask") {}
  explicit EmptyMaskError(const std::string& what) : Error("empty mask: " + what) {}
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; the message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Scene generation could not satisfy the spec within its retry budget.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace shapeseg

// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xmodal {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not agree with what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but degenerate (zero norm, all padding, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written, or its bytes are malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training or a forward op produced a non-finite value. Maps to CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class UnknownAuError : public Error {
 public:
  explicit UnknownAuError(int id)
      : Error("unknown action unit AU" + std::to_string(id)), id_(id) {}

  int id() const noexcept { return id_; }

 private:
  int id_;
};

}  // namespace xmodal

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hbsca {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unsupported or inconsistent algorithm parameters.
struct ParamError : Error {
  using Error::Error;
};

/// Malformed serialized data. `position` is the byte offset of the first
/// offending byte when known.
struct FormatError : Error {
  explicit FormatError(const std::string& msg, std::size_t position = 0)
      : Error(msg), position(position) {}
  std::size_t position = 0;
};

/// An argument outside its documented domain.
struct RangeError : Error {
  using Error::Error;
};

/// API misuse: a call that violates the module's protocol.
struct StateError : Error {
  using Error::Error;
};

/// Attempt to sign twice with one XMSS index. Never recoverable.
struct DoubleSignError : StateError {
  using StateError::StateError;
};

/// All one-time keys of the XMSS tree are spent.
struct KeyExhaustedError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace hbsca

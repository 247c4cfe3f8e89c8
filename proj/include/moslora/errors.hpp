// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace moslora {

/// Base class for every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix dimensions. The message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid adapter / task / sweep configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (bad magic, version, length).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures; the message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace moslora

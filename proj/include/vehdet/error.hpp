#pragma once

#include <stdexcept>
#include <string>

namespace vehdet {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or parameter sizes that do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid NetworkConfig contents (bad key, bad value, broken invariant).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File reading/writing and format decoding failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vehdet

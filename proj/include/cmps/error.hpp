#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmps {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The latent state norm (or density trace) fell below the collapse floor.
class ZeroNormError : public Error {
 public:
  explicit ZeroNormError(std::size_t step, double norm)
      : Error("latent state collapsed at step " + std::to_string(step) +
              " (norm " + std::to_string(norm) + ")"),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmps

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedsysid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument (shape, range, count) was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The Gram matrix Z Z^T is numerically rank deficient.
class SingularDataError : public Error {
 public:
  SingularDataError(const std::string& what, double lambda_min, double lambda_max)
      : Error(what), lambda_min_(lambda_min), lambda_max_(lambda_max) {}

  double lambda_min() const noexcept { return lambda_min_; }
  double lambda_max() const noexcept { return lambda_max_; }

 private:
  double lambda_min_;
  double lambda_max_;
};

/// All noise sources are off, so the state-input covariance is singular.
class IdentifiabilityError : public Error {
 public:
  using Error::Error;
};

/// A local gradient iteration blew up (step size too large).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Recorded process noise is required but the dataset does not carry it.
class MissingNoiseError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path) : Error(what + ": " + path), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace fedsysid

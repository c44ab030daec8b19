#pragma once

#include <stdexcept>
#include <string>

namespace rss {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (codebook, data file, config, mock spec).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a schema invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration that cannot be run as given.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A statistic or distribution that is undefined for the supplied data.
class DataError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  enum class Kind { auth, retry_exhausted, malformed_response, request_rejected, unknown_question, io };

  BackendError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace rss

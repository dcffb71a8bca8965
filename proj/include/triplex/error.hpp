#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace triplex {

// Root of every exception the library throws. The CLI maps the concrete
// subclass onto its exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration (flags, config files, training ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad or missing input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

// Structural problem in a persisted file (bad magic, truncation, ...).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line, const std::string& source = {})
      : DataError((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " +
                  what),
        detail_(what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
};

// A vector that cannot be normalized (all zero or non-finite).
class NormalizationError : public DataError {
 public:
  NormalizationError(const std::string& what, std::string doc_id)
      : DataError(what), doc_id_(std::move(doc_id)) {}

  const std::string& doc_id() const noexcept { return doc_id_; }

 private:
  std::string doc_id_;
};

// Caller broke an API precondition (shape mismatch, k > n, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Optimization blew up (non-finite loss and friends).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Failure talking to an embedding backend.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retriable, std::size_t batch)
      : Error(what), retriable_(retriable), batch_(batch) {}

  bool retriable() const noexcept { return retriable_; }
  std::size_t batch_index() const noexcept { return batch_; }

 private:
  bool retriable_;
  std::size_t batch_;
};

}  // namespace triplex

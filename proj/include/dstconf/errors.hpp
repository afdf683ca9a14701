#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dstconf {

// Base class for everything this library throws.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text/JSON. Carries the byte offset where parsing gave up
// (0 when unknown).
class ParseError : public Error {
public:
  ParseError(const std::string& msg, std::size_t byte_offset = 0)
      : Error(msg), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

private:
  std::size_t byte_offset_;
};

// A (domain, slot) pair that the loaded schema does not know about.
class SchemaError : public Error {
public:
  using Error::Error;
};

// Structural problems in a corpus file (bad turn ids, inconsistent states).
class CorpusError : public Error {
public:
  using Error::Error;
};

// Caller violated a documented precondition.
class InvalidInputError : public Error {
public:
  using Error::Error;
};

// Network/HTTP failure after retries.
class TransportError : public Error {
public:
  using Error::Error;
};

// Strict-replay backend saw a request it has no recording for.
class ReplayMissError : public Error {
public:
  ReplayMissError(const std::string& msg, std::string key)
      : Error(msg), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

private:
  std::string key_;
};

// Backend cannot perform the requested operation (e.g. scoring a fixed
// continuation over a chat-completions endpoint).
class CapabilityError : public Error {
public:
  using Error::Error;
};

// Metric has no defined value on this input (single-class AUC, constant
// Pearson series). Reported as an absence, never as a numeric sentinel.
class UndefinedMetricError : public Error {
public:
  using Error::Error;
};

// Bad run configuration or CLI usage.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Prompt template file missing or missing a required placeholder.
class TemplateError : public Error {
public:
  using Error::Error;
};

}  // namespace dstconf

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace maskfix {

// A computation produced NaN/Inf or was asked to operate outside its domain.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The enumeration oracle was conditioned on cells whose joint marginal mass
// is zero, so no conditional distribution exists.
class DegenerateContextError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the byte offset where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t byte_offset);
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Unknown or invalid key in a configuration file.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, const std::string& key);
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// A checkpoint does not match the model configuration it is loaded into.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Required input file or directory is missing.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Output location cannot be created or written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace maskfix

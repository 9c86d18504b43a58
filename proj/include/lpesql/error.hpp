#pragma once

#include <stdexcept>
#include <string>

namespace lpesql {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(got)) {}
};

/// Remote encoder failed (transport, status, or malformed reply).
class EncoderError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent notebook store on disk.
class StoreError : public Error {
 public:
  using Error::Error;
};

/// A prompt context lacks a field the chosen template requires.
class PromptError : public Error {
 public:
  using Error::Error;
};

/// Completion provider failed after its retry budget, or replied empty.
class ProviderError : public Error {
 public:
  using Error::Error;
};

class NoSqlFound : public Error {
 public:
  NoSqlFound() : Error("no SQL found in model output") {}
};

/// Harness configuration error: the database file does not exist.
class MissingDatabase : public Error {
 public:
  explicit MissingDatabase(const std::string& path)
      : Error("database file not found: " + path) {}
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpesql

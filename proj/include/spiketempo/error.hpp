#pragma once

#include <stdexcept>
#include <string>

namespace spiketempo {

// Every failure raised by the library derives from Error. kind() is a stable
// lowercase tag used by the CLI for machine-parsable error lines.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class IngestError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ingest"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace spiketempo

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nsc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between a layer and the tensor fed to it.
class DimensionError : public Error {
 public:
  DimensionError(std::size_t layer, const std::string& what)
      : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

/// A NaN or infinity reached a place where only finite values are allowed.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A symptom or disease name missing from the vocabulary.
class UnknownNameError : public Error {
 public:
  explicit UnknownNameError(const std::string& name)
      : Error("unknown name '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Every symptom is already known, so nothing is left to ask.
class NoCandidatesError : public Error {
 public:
  NoCandidatesError() : Error("no candidate symptoms") {}
};

class CheckpointError : public Error {
 public:
  enum class Kind { not_a_checkpoint, unsupported_version, truncated, checksum_mismatch, io };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace nsc

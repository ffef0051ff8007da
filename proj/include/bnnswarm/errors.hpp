#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bnnswarm {

// Base for every error raised by the library. `module()` names the
// component that failed so the experiment runner can report it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)), message_(what) {}

  const std::string& module() const noexcept { return module_; }
  // what() without the module prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string module_;
  std::string message_;
};

// Tensor or vector dimensions do not line up.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("bayesian_nn", what) {}
};

class ArgumentError : public Error {
 public:
  ArgumentError(std::string module, const std::string& what) : Error(std::move(module), what) {}
};

// An operation was called in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  StateError(std::string module, const std::string& what) : Error(std::move(module), what) {}
};

// Local optimization produced a non-finite loss.
class DivergedError : public Error {
 public:
  DivergedError(int iteration, const std::string& what)
      : Error("consensus_opt", what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error("peer_protocol", what) {}
};

class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& what) : Error("peer_protocol", "decode: " + what) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error("peer_protocol", "transport: " + what) {}
};

// An exception escaped the NodeUpdate callback; carries the round it happened in.
class UpdateError : public Error {
 public:
  UpdateError(std::uint32_t node, std::uint32_t round, const std::string& what)
      : Error("peer_protocol", "node " + std::to_string(node) + " round " + std::to_string(round) +
                                   ": update failed: " + what),
        round_(round) {}

  std::uint32_t round() const noexcept { return round_; }

 private:
  std::uint32_t round_;
};

class DegenerateDataError : public Error {
 public:
  explicit DegenerateDataError(const std::string& what) : Error("kde_uncertainty", what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(std::string module, const std::string& what) : Error(std::move(module), what) {}
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what) : Error("io", path + ": " + what) {}
};

}  // namespace bnnswarm

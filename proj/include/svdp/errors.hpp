#pragma once

#include <stdexcept>
#include <string>

namespace svdp {

/// Input that violates an operation's precondition (shape, range, cardinality).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two objects that must share structure (keys, shapes, masks) do not.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A NaN or infinity surfaced during computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration is malformed or names an unsupported combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Prompt gradients were requested from a pass that never went through the warp.
class DetachedPromptError : public std::logic_error {
 public:
  DetachedPromptError()
      : std::logic_error("detached prompt: loss is not connected to the prompt state") {}
};

/// File could not be read, written or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svdp

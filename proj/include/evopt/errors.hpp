// evopt/errors.hpp - Typed error hierarchy used across the engine.
#pragma once

#include <stdexcept>
#include <string>

namespace evopt {

enum class ErrorKind {
  kConfig,      // bad configuration file or conflicting flags
  kInput,       // malformed input file (profile, call graph, fixture)
  kGraph,       // unknown component, dangling edge
  kPrecondition,// operation called outside its contract
  kCheckpoint,  // corrupt or version-mismatched checkpoint
  kProvider,    // mutation provider failed after retries
  kMutation,    // unparseable response, ambiguous or missing hunk, marker errors
  kState,       // empty database, missing artifacts
};

class EngineError : public std::runtime_error {
 public:
  EngineError(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace evopt

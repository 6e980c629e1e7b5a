#pragma once

#include <stdexcept>
#include <string>

namespace hardy {

/// Input that violates a documented precondition (CLI exit code 2).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A requested combination that the library does not implement.
class Unsupported : public InvalidInput {
 public:
  explicit Unsupported(const std::string& what) : InvalidInput("unsupported: " + what) {}
};

/// A solver gave up; carries enough context for the CLI (exit code 3).
class SolverFailure : public std::runtime_error {
 public:
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

}  // namespace hardy

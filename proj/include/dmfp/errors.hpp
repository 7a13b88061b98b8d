#pragma once

#include <stdexcept>
#include <string>

namespace dmfp {

/// Base class for all library errors. The `kind()` string is stable and is
/// what the CLI prints in front of the message.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

struct InvalidParameter : Error {
  explicit InvalidParameter(const std::string& w) : Error("invalid-parameter", w) {}
};

struct UnsupportedParameter : Error {
  explicit UnsupportedParameter(const std::string& w) : Error("unsupported-parameter", w) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error("format-error", w) {}
};

/// A slope of the Lagrangian map fell below the admissible floor.
struct DegenerateState : Error {
  explicit DegenerateState(const std::string& w) : Error("degenerate-state", w) {}
};

struct NewtonDivergence : Error {
  explicit NewtonDivergence(const std::string& w) : Error("newton-divergence", w) {}
};

struct InvalidTarget : Error {
  explicit InvalidTarget(const std::string& w) : Error("invalid-target", w) {}
};

struct CrossingCharacteristics : Error {
  explicit CrossingCharacteristics(const std::string& w)
      : Error("crossing-characteristics", w) {}
};

}  // namespace dmfp

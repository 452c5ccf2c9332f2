#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace replab {

/// Base of every error thrown by the library. `module()` names the module
/// whose contract was violated so the CLI can report it.
class Error : public std::runtime_error {
public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

private:
  std::string module_;
};

#define REPLAB_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                         \
  public:                                                             \
    Name(std::string module, const std::string& message)              \
        : Error(std::move(module), message) {}                        \
  };

REPLAB_DEFINE_ERROR(InvalidArgument)
REPLAB_DEFINE_ERROR(DegenerateInput)
REPLAB_DEFINE_ERROR(ConfigError)
REPLAB_DEFINE_ERROR(ReachabilityError)
REPLAB_DEFINE_ERROR(ScatterError)
REPLAB_DEFINE_ERROR(NoTargetError)
REPLAB_DEFINE_ERROR(OutOfViewError)
REPLAB_DEFINE_ERROR(IoError)

#undef REPLAB_DEFINE_ERROR

/// Raised when camera alignment does not reach the acceptance discrepancy.
class AlignmentFailed : public Error {
public:
  AlignmentFailed(const std::string& message, double final_discrepancy)
      : Error("calibration", message), final_discrepancy_(final_discrepancy) {}

  double final_discrepancy() const noexcept { return final_discrepancy_; }

private:
  double final_discrepancy_;
};

}  // namespace replab

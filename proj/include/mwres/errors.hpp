#pragma once

#include <stdexcept>
#include <string>

namespace mwres {

/// Invalid or inconsistent configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical stage could not produce a result. `stage()` names the step
/// of the pipeline that failed.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace mwres

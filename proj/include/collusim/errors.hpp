#pragma once

#include <stdexcept>
#include <string>

namespace collusim {

/// Scenario or topology failed validation. `element` names the offending item.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string element, const std::string& what)
      : std::runtime_error(element.empty() ? what : element + ": " + what),
        element_(std::move(element)) {}

  const std::string& element() const noexcept { return element_; }

 private:
  std::string element_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an optimisation step produces a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A presence report that does not match the simulator state.
class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace collusim

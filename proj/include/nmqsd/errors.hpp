#pragma once

#include <stdexcept>
#include <string>

namespace nmqsd {

/// Invalid or incomplete configuration. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Integration left its validity domain (blow-up, norm guard). Maps to CLI
/// exit code 3.
class NumericalError : public std::runtime_error {
  public:
    NumericalError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const { return time_; }

  private:
    double time_;
};

}  // namespace nmqsd

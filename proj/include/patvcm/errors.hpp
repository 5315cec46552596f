#pragma once

#include <stdexcept>
#include <string>

namespace patvcm {

// Malformed or inconsistent stream data. Maps to CLI exit code 2.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or profile file. Maps to CLI exit code 3.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace patvcm

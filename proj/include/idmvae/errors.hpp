#pragma once

#include <stdexcept>
#include <string>

namespace idmvae {

/// Invalid configuration or invalid input; CLI exit code 1.
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Non-finite values or other numeric failure; CLI exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem failure; CLI exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace idmvae

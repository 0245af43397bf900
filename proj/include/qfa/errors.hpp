#pragma once

#include <stdexcept>
#include <string>

namespace qfa {

// Malformed data supplied by the caller (CSV contents, panel shape, labels).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid estimator, sampler, or simulation configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// A solve or update broke down mid-run. The message carries the failing
// block and iteration/draw index.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qfa

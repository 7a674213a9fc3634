#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdeseg {

/// Bad or inconsistent configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing/malformed files or unwritable outputs (CLI exit code 2).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite loss during optimization (CLI exit code 3). Carries the
/// iteration (or epoch) at which the blow-up was detected.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what_stage, std::size_t iteration)
        : std::runtime_error("non-finite loss at " + what_stage + " " + std::to_string(iteration)),
          iteration_(iteration) {}

    std::size_t iteration() const { return iteration_; }

private:
    std::size_t iteration_;
};

} // namespace pdeseg

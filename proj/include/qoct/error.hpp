#pragma once

#include <stdexcept>
#include <string>

namespace qoct {

// Invalid user input: bad configuration, malformed files, violated
// preconditions on values supplied from outside. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical procedure failed: fit non-convergence, quadrature refinement
// failure, singular systems. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qoct

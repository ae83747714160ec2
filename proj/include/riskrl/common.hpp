#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskrl {

using numvec = std::vector<double>;

/// Thrown when an operation receives arguments violating its preconditions.
class invalid_input : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation fails at runtime (non-convergence, I/O, NaN losses).
class runtime_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw invalid_input(message);
}

inline void ensure(bool condition, const std::string& message) {
    if (!condition) throw runtime_failure(message);
}

} // namespace riskrl

#pragma once

#include <stdexcept>
#include <string>

namespace colight {

/// Bad user input: malformed files, out-of-range parameters, missing paths.
/// The CLI maps this to exit code 2.
struct InvalidInput : std::runtime_error {
    explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside an otherwise valid computation (divergence,
/// non-finite gradients, degenerate geometry). CLI exit code 3.
struct NumericalFailure : std::runtime_error {
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace colight

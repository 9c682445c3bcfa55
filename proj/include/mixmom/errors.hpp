#pragma once

#include <stdexcept>
#include <string>

namespace mixmom {

// Raised when a linear-algebra step cannot produce a usable result
// (singular Jacobian products, non-invertible diagonalizers, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File-system and parsing failures on external inputs.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mixmom

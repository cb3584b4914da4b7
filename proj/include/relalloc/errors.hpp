#pragma once

#include <stdexcept>
#include <string>

namespace relalloc {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A ledger, allocation or p-vector does not match the shape of the system spec.
struct ShapeError : Error {
    using Error::Error;
};

// The sample budget cannot accommodate the scheme's stage-one floors.
struct InfeasibleError : Error {
    using Error::Error;
};

// Exact enumeration would exceed the configured path budget.
struct BudgetExceededError : Error {
    using Error::Error;
};

// Configuration file is missing, malformed, or violates an invariant.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace relalloc

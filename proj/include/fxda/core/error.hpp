#pragma once

#include <stdexcept>
#include <string>

namespace fxda {

// Error taxonomy. Each subtype maps to one failure class so callers and the
// CLI can translate them into exit codes without string matching.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file (bad magic, truncated payload, bad field count).
struct FormatError : Error {
    using Error::Error;
};

// Invalid configuration value or combination.
struct ConfigError : Error {
    using Error::Error;
};

// A call violated an interface contract (shape mismatch, wrong feature part).
struct ContractError : Error {
    using Error::Error;
};

// Non-finite value surfaced in a numeric computation.
struct NumericError : Error {
    using Error::Error;
};

// Training stages invoked out of order.
struct ScheduleError : Error {
    using Error::Error;
};

// Request exceeds what the implementation can provide.
struct CapabilityError : Error {
    using Error::Error;
};

// Corrupt or incompatible persisted state.
struct IntegrityError : Error {
    using Error::Error;
};

// Out-of-range algorithm parameter.
struct ParameterError : Error {
    using Error::Error;
};

}  // namespace fxda

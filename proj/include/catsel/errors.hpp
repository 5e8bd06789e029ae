#pragma once

#include <stdexcept>
#include <string>

namespace catsel {

// Error taxonomy mirrors the CLI exit codes: usage/config problems (2),
// empty selections (3), numerical breakdowns (4).

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad arguments: dimension mismatches, unknown labels or config keys,
// out-of-range parameters.
struct UsageError : Error {
    using Error::Error;
};

// A coherent state's Poisson tail does not fit the requested cutoff.
struct TruncationError : Error {
    TruncationError(const std::string& msg, int required) : Error(msg), required_cutoff(required) {}
    int required_cutoff;
};

// The admission rule rejected every measurement tuple.
struct EmptySelectionError : Error {
    using Error::Error;
};

// Tuples were admitted but every weight vanished (floor pruning, targets
// outside the cutoff), leaving nothing to normalize.
struct DegenerateSelectionError : Error {
    using Error::Error;
};

// Internal consistency failures: probabilities not summing to one,
// non-Hermitian accumulation, NaN propagation and friends.
struct NumericalError : Error {
    using Error::Error;
};

} // namespace catsel

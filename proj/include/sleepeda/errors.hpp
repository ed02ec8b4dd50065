#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sleepeda {

// Base for every exception this library throws.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input decoding and validation.
struct ParseError : Error {
    using Error::Error;
};
struct EmptyTraceError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct DuplicateError : Error {
    using Error::Error;
};
struct ChannelError : Error {
    using Error::Error;
};
struct RangeError : Error {
    using Error::Error;
};
struct AlignmentError : Error {
    using Error::Error;
};

// Statistical preconditions (degenerate but well-formed inputs).
struct DomainError : Error {
    using Error::Error;
};

// Numerical failures (singular matrices, non-PD inputs, rank deficiency).
struct NumericalError : Error {
    using Error::Error;
};
struct SingularError : NumericalError {
    using NumericalError::NumericalError;
};

// Factor analysis: zero eigenvalues above the retention cutoff. A valid
// analysis outcome, not a numerical failure; carries the eigenvalues so the
// caller can report them.
struct NoFactorsRetained : Error {
    std::vector<double> eigenvalues;
    explicit NoFactorsRetained(std::vector<double> eig)
        : Error("no eigenvalue exceeds the retention cutoff"), eigenvalues(std::move(eig)) {}
};

// Causal search.
struct NameError : Error {
    using Error::Error;
};
struct TooLargeError : Error {
    using Error::Error;
};
struct DegenerateCellError : Error {
    using Error::Error;
};

// SEM internal consistency.
struct ContractError : Error {
    using Error::Error;
};

// Predictors.
struct SeparationError : Error {
    using Error::Error;
};
struct FoldError : Error {
    using Error::Error;
};

// Synthetic traces.
struct ScriptError : Error {
    using Error::Error;
};

// CLI configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace sleepeda

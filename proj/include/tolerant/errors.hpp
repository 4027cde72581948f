#pragma once

#include <stdexcept>
#include <string>

namespace tolerant {

// Exit-code classes used by the CLI: validation 1, certificate 2, convergence 3.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CertificateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BracketExhausted : ConvergenceError {
    using ConvergenceError::ConvergenceError;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

}  // namespace tolerant

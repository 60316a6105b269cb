#pragma once

#include <stdexcept>
#include <string>

namespace mixagg {

// Bad user-supplied configuration (sizes, counts, thresholds).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

// Low-level cryptographic failure (library misuse, key mismatch at setup).
struct CryptoError : std::runtime_error {
    explicit CryptoError(const std::string& m) : std::runtime_error(m) {}
};

// Integrity check inside the padding failed on decryption.  Protocol code
// catches this and turns it into an abort verdict; it never reaches users
// of the public API directly.
struct PaddingError : CryptoError {
    explicit PaddingError(const std::string& m) : CryptoError(m) {}
};

// Internal invariant broke (a bug, not an input problem).
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& m) : std::logic_error(m) {}
};

}  // namespace mixagg

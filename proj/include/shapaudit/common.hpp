#pragma once

#include <stdexcept>
#include <string>

namespace shapaudit {

inline constexpr const char* kToolName = "shapaudit";
inline constexpr const char* kToolVersion = "0.1.0";

// Base class for every error the library raises on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller handed us inputs that violate a documented precondition.
struct ValidationError : Error {
    using Error::Error;
};

// File or stream problem: missing file, malformed CSV/JSON, write failure.
struct IoError : Error {
    using Error::Error;
};

// Numerical breakdown at runtime: non-finite loss, singular system.
struct NumericError : Error {
    using Error::Error;
};

// Bad or inconsistent configuration document.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace shapaudit

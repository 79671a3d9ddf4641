#pragma once

#include <stdexcept>
#include <string>

namespace ingram {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file (triplet files, config files). Carries a line number
// in the message where one is known.
struct ParseError : Error {
    using Error::Error;
};

// Bad hyperparameter or config value.
struct ConfigError : Error {
    using Error::Error;
};

// Structural violations: disconnected graphs, double augmentation,
// out-of-range ids.
struct GraphError : Error {
    using Error::Error;
};

// Non-finite values or shape mismatches inside the tensor kernel.
struct NumericError : Error {
    using Error::Error;
};

struct CheckpointError : Error {
    enum class Kind { io, bad_magic, bad_checksum, bad_header, shape_mismatch };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

}  // namespace ingram

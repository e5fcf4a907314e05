#pragma once

#include <stdexcept>
#include <string>

namespace vrl {

// Shape disagreement between tensors or parameter blocks.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error("dimension error: " + msg) {}
};

// Mathematical domain violation (log of non-positive input, p=0 in cross-entropy).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error("domain error: " + msg) {}
};

// Caller violated a documented precondition (empty sequence, s > e, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

// File-format errors, each distinct so callers and tests can tell them apart.
struct BadMagicError : std::runtime_error {
    explicit BadMagicError(const std::string& msg) : std::runtime_error("bad magic: " + msg) {}
};

struct TruncatedFileError : std::runtime_error {
    explicit TruncatedFileError(const std::string& msg) : std::runtime_error("truncated file: " + msg) {}
};

struct ManifestError : std::runtime_error {
    explicit ManifestError(const std::string& msg) : std::runtime_error("manifest error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

}  // namespace vrl

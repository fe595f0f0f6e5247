#pragma once

#include <stdexcept>
#include <string>

namespace objtrans {

// Process exit codes shared by every CLI command.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    adapter = 3,
    data = 4,
};

// Bad configuration or failed validation before any work starts.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Detector process failures: timeouts, protocol violations, unexpected exits.
class AdapterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent dataset files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace objtrans

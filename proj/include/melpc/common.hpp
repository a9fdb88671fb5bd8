#pragma once

#include <stdexcept>
#include <string>

namespace melpc {

// Error taxonomy, mapped to CLI exit codes: usage 2, data 3, numeric 4.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

void log_warn(const std::string& msg);
void log_info(const std::string& msg);

// Quiets warnings/info in tests that exercise noisy paths on purpose.
void set_log_enabled(bool enabled);

}  // namespace melpc

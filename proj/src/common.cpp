#include "melpc/common.hpp"

#include <cstdio>

namespace melpc {

namespace {
bool g_log_enabled = true;
}

void set_log_enabled(bool enabled) { g_log_enabled = enabled; }

void log_warn(const std::string& msg) {
    if (g_log_enabled) std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
    if (g_log_enabled) std::fprintf(stderr, "info: %s\n", msg.c_str());
}

}  // namespace melpc

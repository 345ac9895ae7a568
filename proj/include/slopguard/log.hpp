#pragma once

#include <string>

namespace slopguard {

enum class log_level { debug = 0, info = 1, warn = 2, error = 3 };

void set_log_level(log_level lvl);
log_level get_log_level();
log_level parse_log_level(const std::string& name);  // throws config_error

// plain line-oriented logging to stderr
void log_debug(const std::string& msg);
void log_info(const std::string& msg);
void log_warn(const std::string& msg);
void log_error(const std::string& msg);

}  // namespace slopguard

#include "slopguard/log.hpp"

#include <cstdio>

#include "slopguard/errors.hpp"
#include "slopguard/text.hpp"

namespace slopguard {

static log_level g_level = log_level::info;

void set_log_level(log_level lvl) { g_level = lvl; }

log_level get_log_level() { return g_level; }

log_level parse_log_level(const std::string& name) {
    std::string l = to_lower(name);
    if (l == "debug") return log_level::debug;
    if (l == "info") return log_level::info;
    if (l == "warn" || l == "warning") return log_level::warn;
    if (l == "error") return log_level::error;
    throw config_error("unknown log level: " + name);
}

static void emit(log_level lvl, const char* tag, const std::string& msg) {
    if (lvl < g_level) return;
    std::fprintf(stderr, "%s %s\n", tag, msg.c_str());
    std::fflush(stderr);
}

void log_debug(const std::string& msg) { emit(log_level::debug, "[debug]", msg); }
void log_info(const std::string& msg) { emit(log_level::info, "[info]", msg); }
void log_warn(const std::string& msg) { emit(log_level::warn, "[warn]", msg); }
void log_error(const std::string& msg) { emit(log_level::error, "[error]", msg); }

}  // namespace slopguard

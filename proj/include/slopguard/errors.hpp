#pragma once

#include <stdexcept>
#include <string>

namespace slopguard {

// Process exit codes.  Library code throws; the CLI entry point maps the
// exception type to one of these.
enum exit_code : int {
    exit_ok       = 0,
    exit_user     = 1,  // bad config, bad input files, invalid banlist
    exit_backend  = 2,  // transport failures or unusable endpoint replies
    exit_internal = 3,  // a broken invariant, always a bug
};

// User-facing problems: configuration, CLI arguments, input files.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed data files (corpus lines, dataset records, banlist JSON).
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Network-level failure talking to a completion endpoint, after retries.
struct transport_error : std::runtime_error {
    int attempts;
    transport_error(const std::string& msg, int attempts_)
        : std::runtime_error(msg), attempts(attempts_) {}
};

// The endpoint answered, but the reply is unusable (bad JSON, HTTP 4xx).
struct backend_reply_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct internal_error : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace slopguard

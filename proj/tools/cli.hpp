#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mandi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Flat key=value settings; command-line flags override file values.
struct CliConfig {
    std::string store = "mandi-store";
    std::string data_dir = "data";
    int tau = 10;
    std::vector<int> horizons{1, 7, 14, 28};
    int history_days = 730;
    int max_rank = 10;
    std::string admin_token_env = "MANDI_ADMIN_TOKEN";
    std::string timezone = "Asia/Kolkata";
    unsigned long long seed = 0;
    int jobs = 0;
};

/// Reads `key = value` lines; `#` starts a comment. Throws std::invalid_argument on unknown keys or
/// malformed values.
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Entry point behind the `mandi` executable. `out` receives machine-readable output, `err` logs.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mandi::cli

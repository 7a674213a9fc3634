#pragma once

#include <string>

namespace pdeseg::cli {

/// Shared entry point for the CLI binary. `command` is one of gen, solve,
/// train, eval, sweep. Returns the process exit code: 0 success, 1 config
/// error, 2 I/O error, 3 numerical divergence.
int run(const std::string& command, const std::string& config_path,
        const std::string& out_override, long long seed_override, bool has_seed_override,
        int jobs);

} // namespace pdeseg::cli

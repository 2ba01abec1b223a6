#pragma once

// kppctl front-end, callable in-process so the tests can drive it.

#include <iosfwd>
#include <string_view>

namespace kpp {

inline constexpr std::string_view kppctl_version = "0.1.0";

/// Exit statuses; the values are part of the interface.
enum ExitCode : int { exit_ok = 0, exit_assumption_failure = 1, exit_divergence = 2, exit_usage = 3 };

/// Output directory override, read only when --out is absent.
inline constexpr const char* out_dir_env = "KPPCTL_OUT_DIR";

/// Parses argv (argv[0] is the program name), runs one subcommand and returns
/// an ExitCode. Diagnostics go to `err`, a short summary to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kpp

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dta {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

// Makes a running `serve` return; safe to call from a signal handler.
void request_shutdown();

}  // namespace dta

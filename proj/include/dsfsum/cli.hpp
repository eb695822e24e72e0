#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dsf::cli {

// Runs one subcommand. Exit codes: 0 success, 1 validation or usage error,
// 2 I/O error. Outputs are deterministic for a fixed --seed.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace dsf::cli

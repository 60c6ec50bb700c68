#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hgmts {

/// Entry point of the `hgmts` tool. `args` excludes the program name.
/// Returns 0 on success; on any error prints a message and usage to `err`
/// and returns nonzero.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hgmts

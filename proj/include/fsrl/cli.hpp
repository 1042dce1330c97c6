#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fsrl {

// Runs one invocation. `args` excludes the program name. Returns the process exit code:
// 0 on success, 1 on invalid input or failure (one `error kind=... msg="..."` line on `err`).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Version string recorded in manifests, e.g. "0.1.0+g1a2b3c4".
std::string version_string();

}  // namespace fsrl

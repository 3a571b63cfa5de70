#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seqformer::cli {

/// Runs one invocation. args excludes the program name. Returns the process
/// exit code: 0 on success, 1 on a runtime failure, 2 on a usage error. All
/// errors go to `err` as a single line starting with "error:".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqformer::cli

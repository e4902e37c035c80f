#pragma once

#include <string>
#include <vector>

namespace flowlab::cli {

/// Runs the experiment CLI; args exclude the program name. Returns the
/// process exit status. On failure, partially written outputs are removed.
int run(const std::vector<std::string>& args);

}  // namespace flowlab::cli

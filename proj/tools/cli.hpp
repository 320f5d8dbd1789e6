#pragma once

#include <string>
#include <vector>

namespace pml::cli {

/// Runs `pml <command> [flags]` and returns the process exit status:
/// 0 success, 1 usage, 2 geometry, 3 solver, 4 resolution, 5 internal.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

/// Builds the SVG and CSV bundle from the artifacts found under `dir`.
void build_report(const std::string& dir, const std::string& out);

}  // namespace pml::cli

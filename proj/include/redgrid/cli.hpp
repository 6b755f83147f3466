#pragma once

#include <string>
#include <vector>

namespace redgrid {

/// CLI entry point. Exit codes: 0 success, 1 validation/input error,
/// 2 numerical failure.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, char** argv);

}  // namespace redgrid

#pragma once

namespace switchdiff::tools {

/// Entry point of the switchdiff executable. Returns the process exit code:
/// 0 when every requested stage completed, 1 on a failed stage, 2 on a
/// configuration error.
int run_cli(int argc, char** argv);

}  // namespace switchdiff::tools

#pragma once

#include <string>
#include <vector>

namespace gfv {

// Entry point behind the `gfv` binary, callable in-process. `args` excludes
// the program name. Returns the process exit code: 0 on success, 1 on usage
// errors (one-line message on stderr), 2 on runtime failures (diagnostic
// naming the failing file or field).
int cli_run(const std::vector<std::string>& args);

}  // namespace gfv

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace modefuse {

// Parses argv-style arguments (no program name) and executes one verb:
// run, ensemble, eval, report. Returns the process exit code; 0 ok,
// 1 usage, 2 config, 3 io, 4 backend, 5 validation.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modefuse

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qcreg {

/// Entry point of the `qcreg` tool. `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors, 2 on runtime errors.
int cli_main(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
int cli_main(int argc, char **argv);

} // namespace qcreg

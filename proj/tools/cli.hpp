#pragma once

#include <iosfwd>

namespace vehdet {

/// Entry point of the `vehdet` tool. Returns 0 on success, 1 on runtime
/// errors and 2 on usage errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace vehdet

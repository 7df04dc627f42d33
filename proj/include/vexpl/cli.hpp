#pragma once

#include <iosfwd>

namespace vexpl::cli {

/// Entry point of the `vexpl` command. Returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vexpl::cli

#pragma once

#include <iosfwd>

namespace hsnct::cli {

/// Runs the hsnct command line. Returns 0 on success, 1 on validation or
/// usage errors and 2 on I/O errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hsnct::cli

#pragma once

#include <ostream>

namespace jointrait::cli {

/// Entry point of the `jointrait` command. Exit codes: 0 success, 1 data or
/// configuration error (the offending field is named on `err`), 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jointrait::cli

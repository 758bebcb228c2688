#pragma once

#include <ostream>

namespace ibtm::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error or missing input file.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ibtm::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace twsbm::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

/// Entry point shared by the executable and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace twsbm::cli

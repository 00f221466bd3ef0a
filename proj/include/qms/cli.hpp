#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qms {

// Exit codes: 0 success, 1 validation failure, 2 numerical check above
// tolerance, 3 I/O or parse error.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace qms

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace demoproc::cli {

// Exit codes: 0 success, 1 usage error, 2 data/format error,
// 3 numerical/degenerate error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace demoproc::cli

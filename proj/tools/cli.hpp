#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "litpilot/llm/backend.hpp"

namespace litpilot::cli {

// Runs one command line (without the program name). Exit codes: 0 success,
// 1 library/domain error, 2 usage error. `backend`, when set, replaces the
// configured one (tests inspect a mock this way).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::shared_ptr<llm::Backend> backend = nullptr);

}  // namespace litpilot::cli

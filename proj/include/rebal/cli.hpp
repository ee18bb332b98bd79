// Command-line entry point: resample, fit, evaluate, diagnose, mc-run,
// seeds-sweep. Returns the process exit status (0 ok, 1 config/data fault,
// 2 numerical failure).
#pragma once

#include <string>
#include <vector>

namespace rebal::cli {

int run(const std::vector<std::string>& args);

}  // namespace rebal::cli

#pragma once

#include <iosfwd>

#include "lada/error.hpp"

namespace lada::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

int exit_code_for(ErrorKind kind);

/// Entry point for `lada <gen-data|sample-ci|train|sweep> [flags]`.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace lada::cli

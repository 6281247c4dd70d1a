#pragma once

#include <string>
#include <vector>

namespace lgn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitInternal = 2;

/// Runs one of synth, train, eval, score, plot. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace lgn::cli

#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "glrd/config.hpp"

namespace glrd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitProvider = 2;

/// Runs one subcommand; `args` excludes the program name. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Subcommand bodies. They throw InputError / ProviderError; `run` maps those
// to exit codes.
int cmdRefine(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmdSolvePsl(const std::array<double, 3>& x, const RunConfig& cfg, std::ostream& out);
int cmdBalance(const RunConfig& cfg, std::ostream& out);
int cmdDbcSim(const RunConfig& cfg, std::ostream& out);
int cmdBaol(const RunConfig& cfg, std::ostream& out);
int cmdEval(const RunConfig& cfg, std::ostream& out);
int cmdGenSynthetic(const RunConfig& cfg, std::ostream& out);

}  // namespace glrd::cli

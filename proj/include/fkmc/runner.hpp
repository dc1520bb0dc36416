#pragma once

#include <iosfwd>

#include "fkmc/config.hpp"

namespace fkmc {

/// Executes a parsed command: writes the result file(s), logs one line per
/// stage to `log`, and returns the process exit code (0 success, 2 config,
/// 3 numeric, 4 validation failure).  FKMC_OUTPUT_DIR, when set, replaces the
/// directory part of the configured output path.
int run_command(const RunConfig& cfg, std::ostream& log);

/// Module-invariant battery behind the `selftest` command.
int run_selftest(std::uint64_t seed, int workers, std::ostream& log);

}  // namespace fkmc

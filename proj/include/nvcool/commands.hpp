#pragma once

#include "nvcool/config.hpp"
#include "nvcool/table.hpp"

// One function per CLI subcommand.  Each builds a Table (header = resolved
// parameters + version, rows = results, footer = summaries/warnings);
// run_command dispatches, writes the output file if requested, and enforces
// the compare check gate last so the table is on disk before a violation is
// raised.

namespace nvcool::commands {

using config::RunSpec;
using table::Table;

Table cmd_analytic_sweep(const RunSpec& spec);
Table cmd_gamma_sweep(const RunSpec& spec);
Table cmd_evolve(const RunSpec& spec);  // evolve-full | evolve-reduced | evolve-meanfield
Table cmd_compare(const RunSpec& spec);
Table cmd_derive_params(const RunSpec& spec);

// Throws CheckError when a gated row (Gamma >= 10 max(gamma_a, gamma_b))
// exceeds the absolute tolerance.
void enforce_compare_check(const RunSpec& spec, const Table& t);

Table run_command(const RunSpec& spec);

}  // namespace nvcool::commands

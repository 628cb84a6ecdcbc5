#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nvcool/hilbert.hpp"
#include "nvcool/liouville.hpp"
#include "nvcool/model.hpp"

// JSON run configuration.  Frequencies and rates are given either as
// ordinary-frequency values under keys suffixed `_over_2pi` (scaled by 2 pi
// on load) or as dimensionless renormalized values under a top-level
// `renormalized: true` flag -- exactly one style per file.  Occupations
// (nbar_a, nbar_b) are pure numbers in both styles.

namespace nvcool::config {

using hilbert::Index;

struct SweepAxis {
    std::string name;            // SystemParams field name
    std::vector<double> values;  // resolved to angular units
};

struct Truncation {
    Index dim_a = 0;  // 0 = unset (profile fills)
    Index dim_b = 0;
};

struct InitialState {
    bool spin_excited = false;
    std::optional<double> n_a;  // thermal occupation; default nbar_a
    std::optional<double> n_b;  // thermal occupation; default nbar_b
};

struct RunSpec {
    std::string mode;  // analytic-sweep | gamma-sweep | evolve-full |
                       // evolve-reduced | evolve-meanfield | compare | derive-params
    model::SystemParams params;
    std::optional<model::PhysicalParams> physical;  // derive-params input
    std::vector<SweepAxis> sweep;                   // input order preserved
    Truncation truncation;
    bool explicit_truncation = false;  // config gave dims (profile must not override)
    liouville::IntegratorSpec integrator;
    liouville::StationaritySpec stationarity;
    InitialState initial;
    std::string output;
    std::string profile;  // "", "ci", "paper"
    int threads = 1;
    bool check = false;          // compare: gate |numeric - analytic| and fail loudly
    double check_abs_tol = 0.05;
    bool renormalized = false;
    std::vector<std::string> warnings;
};

// Parses and validates one JSON document.  Unknown keys, missing required
// fields, and mixed parameter styles are ConfigErrors naming the key.
RunSpec load_config(const std::string& path);

// Fills profile-dependent defaults (truncation dims) and attaches truncation
// and physical-regime warnings.  Call after CLI overrides, before running.
void resolve(RunSpec& spec);

// Appendix-style default mode-a dimension for a given drive occupation.
Index default_dim_a(double nbar_a);

}  // namespace nvcool::config

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nvcool/liouville.hpp"
#include "nvcool/reduced.hpp"

// Analytic layer: factorized number-operator ODEs, their stationary
// quadratic, the hot-bath asymptote, the quantum-regime cooling threshold,
// and the optimal-spin-damping search.

namespace nvcool::meanfield {

using liouville::IntegratorSpec;
using liouville::StationaritySpec;
using reduced::ReducedParams;

// ----- types -----

struct MeanFieldState {
    double n_s = 0.0;  // spin excitation, [0, 1]
    double n_b = 0.0;  // mode-b occupation, >= 0
};

struct MeanFieldTrajectory {
    std::vector<double> times;
    std::vector<MeanFieldState> states;
    std::optional<double> stationary_at;

    const MeanFieldState& final_state() const;
};

// Coefficients of A x^2 + B x + C = 0 for the stationary n_b.
// For valid parameters A <= 0 and C >= 0, so at most one root is >= 0.
struct QuadraticCoeffs {
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
};

struct GammaSearchResult {
    double gamma = 0.0;  // minimizer of stationary n_b over the range
    double nb = 0.0;     // stationary n_b at the minimizer
    bool unimodal = true;
    bool flat = false;
    std::vector<std::string> warnings;
};

// ----- operations -----

// Factorized rates (dn_s/dt, dn_b/dt); the explicit-ns overload bypasses
// ns_prime (e.g. to pin it to 0).
std::pair<double, double> mean_field_rhs(const MeanFieldState& s, const ReducedParams& p);
std::pair<double, double> mean_field_rhs(const MeanFieldState& s, const ReducedParams& p, double ns);

// Fixed-step RK4 on the two coupled rates.  Throws NumericError when the
// state leaves the physical region (n_b < 0 or n_s outside [0,1] beyond
// 1e-9): the factorized model has broken down.
MeanFieldTrajectory evolve_mean_field(const MeanFieldState& initial, const ReducedParams& p,
                                      const IntegratorSpec& spec,
                                      const StationaritySpec& stationarity = {});

QuadraticCoeffs quadratic_coeffs(const ReducedParams& p);
QuadraticCoeffs quadratic_coeffs(const ReducedParams& p, double ns);

// Unique nonnegative root (compensated evaluation; linear fallback at A=0).
double stationary_nb(const QuadraticCoeffs& q);
double stationary_nb(const ReducedParams& p);

// Spin excitation consistent with a stationary n_b.
double stationary_ns(const ReducedParams& p, double n_b);
double stationary_ns(const ReducedParams& p, double n_b, double ns);

// Stationary n_b in the hot-mode-a limit:
//   1/2 (u + sqrt(u^2 + 2 nbar_b)),  u = nbar_b - (gamma_b + Gamma)/(2 gamma_b).
double asymptotic_nb(double nbar_b, double gamma_b, double Gamma);

// Spin damping above which the asymptotic occupation drops below one
// phonon: 3 gamma_b (nbar_b - 1), clamped to 0.
double cooling_threshold(double nbar_b, double gamma_b);

// Minimizes stationary_nb over Gamma in [gamma_lo, gamma_hi]: coarse log
// grid to screen for unimodality, then golden-section refinement to 1e-4
// relative tolerance.  Non-unimodal profiles return the global grid minimum
// with a warning; flat profiles return the range minimum with a warning.
GammaSearchResult optimal_gamma(const ReducedParams& p, double gamma_lo, double gamma_hi);

}  // namespace nvcool::meanfield

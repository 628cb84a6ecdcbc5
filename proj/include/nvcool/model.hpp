#pragma once

#include <string>
#include <vector>

#include "nvcool/hilbert.hpp"

// System construction for a two-mode mechanical resonator whose beat mode is
// magnetically coupled to a single NV-center spin.  Everything is expressed
// in angular units; a consistent global rescaling of all rates/frequencies
// together with time leaves the dynamics invariant, which is how the
// dimensionless (gamma_b = 1) parameter sets are handled.

namespace nvcool::model {

using hilbert::ComplexMatrix;
using hilbert::Index;
using hilbert::SpaceLayout;
using hilbert::SparseOperator;
using hilbert::Subsystem;

// ----- parameter sets -----

// Angular frequencies/rates (rad/s, or dimensionless multiples of gamma_b).
struct SystemParams {
    double omega_z = 0.0;  // spin splitting in the rotating frame
    double delta = 0.0;    // mode detuning omega_b - omega_a (resonance: delta = omega_z)
    double g_a = 0.0;      // dispersive coupling, mode a
    double g_b = 0.0;      // dispersive coupling, mode b
    double g_ab = 0.0;     // beat-mode (cross) coupling
    double gamma_a = 0.0;  // mechanical damping, mode a
    double gamma_b = 0.0;  // mechanical damping, mode b
    double Gamma = 0.0;    // spin relaxation (optical pumping) rate
    double nbar_a = 0.0;   // drive-set thermal occupation of mode a
    double nbar_b = 0.0;   // bath occupation of mode b

    void validate() const;  // throws ConfigError on out-of-domain values
};

// Lab-frame quantities from which SystemParams can be derived.
struct PhysicalParams {
    double mass_a = 0.0;           // kg
    double mass_b = 0.0;           // kg
    double omega_a = 0.0;          // mechanical frequency, rad/s
    double omega_b = 0.0;          // mechanical frequency, rad/s
    double gradient2 = 0.0;        // second-order field gradient G2, T/m^2
    double temperature = 0.0;      // K
    double quality_factor = 0.0;   // Q (damping gamma = omega_a / Q for both modes)
};

// One collapse channel: weight w and operator x of the dissipator
// D_x(rho) = 2 x rho x^dag - x^dag x rho - rho x^dag x, contributing w * D_x.
struct LindbladTerm {
    double weight = 0.0;
    SparseOperator op;
};

// ----- physical constants (SI) -----

inline constexpr double kHbar = 1.054571817e-34;      // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J / K
inline constexpr double kBohrMagneton = 9.2740100783e-24;  // J / T
inline constexpr double kSpinG = 2.0;                 // NV electron g-factor

// ----- system construction -----

// Free rotating-frame Hamiltonian (omega_z / 2) sigma_z + delta b^dag b.
SparseOperator build_h0(const SystemParams& p, const SpaceLayout& layout);

// Static interaction (g_a a^dag a + g_b b^dag b + g_ab (a^dag b + a b^dag)) sigma_x.
SparseOperator build_h1_full(const SystemParams& p, const SpaceLayout& layout);

// Rotating-wave interaction g_a (a^dag a - nbar_a)(sigma_+ + sigma_-)
//                           + g_ab (a^dag b sigma_+ + a b^dag sigma_-).
SparseOperator build_h1_rwa(const SystemParams& p, const SpaceLayout& layout);

// The five thermal/relaxation channels, in fixed order:
//   (gamma_a (1 + nbar_a), a), (gamma_a nbar_a, a^dag),
//   (gamma_b (1 + nbar_b), b), (gamma_b nbar_b, b^dag), (Gamma, sigma_-).
// Zero-occupation channels are kept with weight 0.
std::vector<LindbladTerm> build_collapse_terms(const SystemParams& p, const SpaceLayout& layout);

// ----- parameter derivation -----

double zero_point_fluctuation(double mass, double omega);               // sqrt(hbar / 2 m omega)
double coupling_from_gradient(double gradient2, double x1, double x2);  // g_s mu_B G2 x1 x2 / hbar
double bose_occupation(double omega, double temperature);              // 1 / (exp(hbar w / kT) - 1)

SystemParams derive_system_params(const PhysicalParams& p, double Gamma, double nbar_a);

// Hierarchy checks behind the dispersive/adiabatic treatment (factor-100
// margins).  Returns human-readable warnings; empty means comfortably inside.
std::vector<std::string> validate_regime(const SystemParams& p);

}  // namespace nvcool::model

#pragma once

#include <optional>
#include <vector>

#include "nvcool/hilbert.hpp"
#include "nvcool/liouville.hpp"
#include "nvcool/model.hpp"

// Spin (x) mode-b master equation after adiabatic elimination of the hot
// mode a.  Mode a survives only through the effective swap rates
// g_ab^2 (1+nbar_a)/kappa, g_ab^2 nbar_a/kappa and the effective spin
// occupation ns_prime.

namespace nvcool::reduced {

using hilbert::DensityMatrix;
using hilbert::SpaceLayout;
using hilbert::SparseOperator;
using liouville::IntegratorSpec;
using liouville::StationaritySpec;
using liouville::Trajectory;
using model::LindbladTerm;

// ----- types -----

struct ReducedParams {
    double omega_z = 0.0;
    double delta = 0.0;
    double g_a = 0.0;
    double g_ab = 0.0;
    double gamma_a = 0.0;
    double gamma_b = 0.0;
    double Gamma = 0.0;
    double nbar_a = 0.0;
    double nbar_b = 0.0;

    static ReducedParams from_system(const model::SystemParams& p);

    double kappa() const { return gamma_a + gamma_b + Gamma; }
    void validate() const;  // kappa > 0, rates and occupations >= 0
};

// ----- operations -----

// Effective spin occupation induced by the eliminated mode:
//   (2 gamma_a + Gamma) g_a^2 (nbar_a^2 + nbar_a)
//   ------------------------------------------------
//   Gamma (omega_z^2 + (2 gamma_a + Gamma)^2)
double ns_prime(const ReducedParams& p);

// H0 on the reduced space: (omega_z/2) sigma_z + delta b^dag b.
SparseOperator build_reduced_h0(const ReducedParams& p, const SpaceLayout& layout);

// Exactly six terms, fixed order:
//   g_ab^2 (1+nbar_a)/kappa  on  b sigma_+
//   g_ab^2 nbar_a/kappa      on  b^dag sigma_-
//   (1+ns) Gamma             on  sigma_-
//   ns Gamma                 on  sigma_+
//   gamma_b (1+nbar_b)       on  b
//   gamma_b nbar_b           on  b^dag
// The second overload takes ns explicitly (e.g. to pin it to 0).
std::vector<LindbladTerm> build_reduced_terms(const ReducedParams& p, const SpaceLayout& layout);
std::vector<LindbladTerm> build_reduced_terms(const ReducedParams& p, const SpaceLayout& layout,
                                              double ns);

// Propagates rho0 (spin (x) b) under H0 + the six terms, recording n_b and
// n_s with the same diagnostics as the full model.
Trajectory evolve_reduced(const DensityMatrix& rho0, const ReducedParams& p,
                          const IntegratorSpec& spec, const StationaritySpec& stationarity = {},
                          std::optional<double> ns_override = std::nullopt,
                          DensityMatrix* final_state = nullptr);

}  // namespace nvcool::reduced

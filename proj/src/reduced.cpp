#include "nvcool/reduced.hpp"

#include <stdexcept>

#include "nvcool/errors.hpp"

namespace nvcool::reduced {

using hilbert::Index;
using hilbert::Subsystem;

namespace {

void require_spin_b(const SpaceLayout& layout, const char* fn) {
    if (!layout.has(Subsystem::Spin) || !layout.has(Subsystem::ModeB) || layout.has(Subsystem::ModeA))
        throw std::invalid_argument(std::string(fn) + ": layout must be spin (x) mode b");
}

}  // namespace

// ----- ReducedParams -----

ReducedParams ReducedParams::from_system(const model::SystemParams& p) {
    ReducedParams r;
    r.omega_z = p.omega_z;
    r.delta = p.delta;
    r.g_a = p.g_a;
    r.g_ab = p.g_ab;
    r.gamma_a = p.gamma_a;
    r.gamma_b = p.gamma_b;
    r.Gamma = p.Gamma;
    r.nbar_a = p.nbar_a;
    r.nbar_b = p.nbar_b;
    return r;
}

void ReducedParams::validate() const {
    if (gamma_a < 0 || gamma_b < 0 || Gamma < 0)
        throw ConfigError("ReducedParams: rates must be >= 0");
    if (nbar_a < 0 || nbar_b < 0) throw ConfigError("ReducedParams: occupations must be >= 0");
    if (!(kappa() > 0)) throw ConfigError("ReducedParams: kappa = gamma_a + gamma_b + Gamma must be > 0");
}

// ----- ns_prime -----

double ns_prime(const ReducedParams& p) {
    if (!(p.Gamma > 0))
        throw ConfigError("ns_prime: Gamma must be > 0 (spin relaxation sets the scale; invalid regime)");
    const double width = 2.0 * p.gamma_a + p.Gamma;
    const double num = width * p.g_a * p.g_a * (p.nbar_a * p.nbar_a + p.nbar_a);
    const double den = p.Gamma * (p.omega_z * p.omega_z + width * width);
    return num / den;
}

// ----- operators -----

SparseOperator build_reduced_h0(const ReducedParams& p, const SpaceLayout& layout) {
    require_spin_b(layout, "build_reduced_h0");
    SparseOperator h = hilbert::embed(hilbert::sigma_z(), Subsystem::Spin, layout).scaled(p.omega_z / 2.0);
    h = h + hilbert::embed(hilbert::number_op(layout.dim_of(Subsystem::ModeB)), Subsystem::ModeB, layout)
                .scaled(p.delta);
    return h;
}

std::vector<LindbladTerm> build_reduced_terms(const ReducedParams& p, const SpaceLayout& layout) {
    return build_reduced_terms(p, layout, ns_prime(p));
}

std::vector<LindbladTerm> build_reduced_terms(const ReducedParams& p, const SpaceLayout& layout,
                                              double ns) {
    require_spin_b(layout, "build_reduced_terms");
    p.validate();
    if (ns < 0) throw std::invalid_argument("build_reduced_terms: ns must be >= 0");

    const double kap = p.kappa();
    const Index db = layout.dim_of(Subsystem::ModeB);
    const SparseOperator b = hilbert::embed(hilbert::annihilation(db), Subsystem::ModeB, layout);
    const SparseOperator bdag = b.adjoint();
    const SparseOperator sm = hilbert::embed(hilbert::sigma_minus(), Subsystem::Spin, layout);
    const SparseOperator sp = sm.adjoint();

    std::vector<LindbladTerm> terms;
    terms.push_back({p.g_ab * p.g_ab * (1.0 + p.nbar_a) / kap, b * sp});
    terms.push_back({p.g_ab * p.g_ab * p.nbar_a / kap, bdag * sm});
    terms.push_back({(1.0 + ns) * p.Gamma, sm});
    terms.push_back({ns * p.Gamma, sp});
    terms.push_back({p.gamma_b * (1.0 + p.nbar_b), b});
    terms.push_back({p.gamma_b * p.nbar_b, bdag});
    return terms;
}

// ----- propagation -----

Trajectory evolve_reduced(const DensityMatrix& rho0, const ReducedParams& p,
                          const IntegratorSpec& spec, const StationaritySpec& stationarity,
                          std::optional<double> ns_override, DensityMatrix* final_state) {
    const SpaceLayout& layout = rho0.layout();
    require_spin_b(layout, "evolve_reduced");

    const double ns = ns_override ? *ns_override : ns_prime(p);
    const SparseOperator h0 = build_reduced_h0(p, layout);
    const auto terms = build_reduced_terms(p, layout, ns);

    std::map<std::string, SparseOperator> observables;
    observables.emplace("n_b", hilbert::embed(hilbert::number_op(layout.dim_of(Subsystem::ModeB)),
                                              Subsystem::ModeB, layout));
    observables.emplace("n_s", hilbert::embed(hilbert::sigma_plus() * hilbert::sigma_minus(),
                                              Subsystem::Spin, layout));
    return liouville::evolve(rho0, h0, terms, spec, observables, stationarity, final_state);
}

}  // namespace nvcool::reduced

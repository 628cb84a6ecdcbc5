#include "nvcool/model.hpp"

#include <cmath>

#include "nvcool/errors.hpp"

namespace nvcool::model {

void SystemParams::validate() const {
    if (gamma_a < 0 || gamma_b < 0 || Gamma < 0) throw ConfigError("SystemParams: rates must be >= 0");
    if (nbar_a < 0 || nbar_b < 0) throw ConfigError("SystemParams: occupations must be >= 0");
    if (omega_z < 0) throw ConfigError("SystemParams: omega_z must be >= 0");
}

// ----- system construction -----

SparseOperator build_h0(const SystemParams& p, const SpaceLayout& layout) {
    using hilbert::embed;
    SparseOperator h(layout.total_dim());
    if (layout.has(Subsystem::Spin))
        h = h + (0.5 * p.omega_z) * embed(hilbert::sigma_z(), Subsystem::Spin, layout);
    if (layout.has(Subsystem::ModeB))
        h = h + p.delta * embed(hilbert::number_op(layout.dim_of(Subsystem::ModeB)), Subsystem::ModeB, layout);
    return h;
}

SparseOperator build_h1_full(const SystemParams& p, const SpaceLayout& layout) {
    using hilbert::embed;
    const Index da = layout.dim_of(Subsystem::ModeA);
    const Index db = layout.dim_of(Subsystem::ModeB);
    const SparseOperator a = embed(hilbert::annihilation(da), Subsystem::ModeA, layout);
    const SparseOperator b = embed(hilbert::annihilation(db), Subsystem::ModeB, layout);
    const SparseOperator sx = embed(hilbert::sigma_x(), Subsystem::Spin, layout);

    SparseOperator mech = p.g_a * (a.adjoint() * a) + p.g_b * (b.adjoint() * b) +
                          p.g_ab * (a.adjoint() * b + a * b.adjoint());
    return sx * mech;  // sigma_x commutes with the mode operators
}

SparseOperator build_h1_rwa(const SystemParams& p, const SpaceLayout& layout) {
    using hilbert::embed;
    const Index da = layout.dim_of(Subsystem::ModeA);
    const Index db = layout.dim_of(Subsystem::ModeB);
    const SparseOperator a = embed(hilbert::annihilation(da), Subsystem::ModeA, layout);
    const SparseOperator b = embed(hilbert::annihilation(db), Subsystem::ModeB, layout);
    const SparseOperator sp = embed(hilbert::sigma_plus(), Subsystem::Spin, layout);
    const SparseOperator sm = embed(hilbert::sigma_minus(), Subsystem::Spin, layout);
    const SparseOperator sx = sp + sm;

    // delta_n = a^dag a - nbar_a: the quadratic spin shift around the drive point
    const SparseOperator delta_n =
        a.adjoint() * a - p.nbar_a * hilbert::identity_op(layout.total_dim());
    return p.g_a * (delta_n * sx) + p.g_ab * ((a.adjoint() * b) * sp + (a * b.adjoint()) * sm);
}

std::vector<LindbladTerm> build_collapse_terms(const SystemParams& p, const SpaceLayout& layout) {
    using hilbert::embed;
    const Index da = layout.dim_of(Subsystem::ModeA);
    const Index db = layout.dim_of(Subsystem::ModeB);
    const SparseOperator a = embed(hilbert::annihilation(da), Subsystem::ModeA, layout);
    const SparseOperator b = embed(hilbert::annihilation(db), Subsystem::ModeB, layout);
    const SparseOperator sm = embed(hilbert::sigma_minus(), Subsystem::Spin, layout);

    return {
        {p.gamma_a * (1.0 + p.nbar_a), a},
        {p.gamma_a * p.nbar_a, a.adjoint()},
        {p.gamma_b * (1.0 + p.nbar_b), b},
        {p.gamma_b * p.nbar_b, b.adjoint()},
        {p.Gamma, sm},
    };
}

// ----- parameter derivation -----

double zero_point_fluctuation(double mass, double omega) {
    if (mass <= 0 || omega <= 0) throw ConfigError("zero_point_fluctuation: mass and omega must be > 0");
    return std::sqrt(kHbar / (2.0 * mass * omega));
}

double coupling_from_gradient(double gradient2, double x1, double x2) {
    return kSpinG * kBohrMagneton * gradient2 * x1 * x2 / kHbar;
}

double bose_occupation(double omega, double temperature) {
    if (omega <= 0) throw ConfigError("bose_occupation: omega must be > 0");
    if (temperature < 0) throw ConfigError("bose_occupation: temperature must be >= 0");
    if (temperature == 0) return 0.0;
    return 1.0 / std::expm1(kHbar * omega / (kBoltzmann * temperature));
}

SystemParams derive_system_params(const PhysicalParams& p, double Gamma, double nbar_a) {
    if (p.quality_factor <= 0) throw ConfigError("derive_system_params: quality_factor must be > 0");
    if (p.omega_b <= p.omega_a) throw ConfigError("derive_system_params: omega_b must exceed omega_a");
    const double xa = zero_point_fluctuation(p.mass_a, p.omega_a);
    const double xb = zero_point_fluctuation(p.mass_b, p.omega_b);

    SystemParams s;
    s.omega_z = p.omega_b - p.omega_a;  // spin driven at the beat frequency
    s.delta = s.omega_z;
    s.g_a = coupling_from_gradient(p.gradient2, xa, xa);
    s.g_b = coupling_from_gradient(p.gradient2, xb, xb);
    s.g_ab = coupling_from_gradient(p.gradient2, xa, xb);
    s.gamma_a = p.omega_a / p.quality_factor;  // both damping rates quoted against omega_a
    s.gamma_b = p.omega_a / p.quality_factor;
    s.Gamma = Gamma;
    s.nbar_a = nbar_a;
    s.nbar_b = bose_occupation(p.omega_b, p.temperature);
    return s;
}

std::vector<std::string> validate_regime(const SystemParams& p) {
    std::vector<std::string> warnings;
    const auto require_much_less = [&warnings](double lhs, double rhs, const std::string& msg) {
        // "much less" pinned down as a factor of 100
        if (!(lhs < rhs / 100.0)) warnings.push_back(msg);
    };

    require_much_less(p.g_a * std::sqrt(p.nbar_a), p.omega_z,
                      "weak coupling strained: g_a sqrt(nbar_a) is not << omega_z");
    require_much_less(p.g_b * std::sqrt(p.nbar_b), p.omega_z,
                      "weak coupling strained: g_b sqrt(nbar_b) is not << omega_z");
    require_much_less(p.g_ab * std::sqrt(p.nbar_a * p.nbar_b), p.omega_z,
                      "weak coupling strained: g_ab sqrt(nbar_a nbar_b) is not << omega_z");
    if (p.g_ab > 0)
        require_much_less(std::sqrt(p.nbar_a), p.delta / p.g_ab,
                          "rotating-wave approximation strained: sqrt(nbar_a) is not << delta / g_ab");
    require_much_less(std::max({p.Gamma, p.gamma_a, p.gamma_b}), p.omega_z,
                      "timescale separation strained: max(Gamma, gamma_a, gamma_b) is not << omega_z");
    return warnings;
}

}  // namespace nvcool::model

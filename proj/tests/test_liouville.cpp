#include <doctest.h>

#include <cmath>
#include <random>

#include "nvcool/errors.hpp"
#include "nvcool/liouville.hpp"
#include "nvcool/model.hpp"

using namespace nvcool;
using hilbert::Complex;
using hilbert::ComplexMatrix;
using hilbert::DensityMatrix;
using hilbert::Index;
using hilbert::SpaceLayout;
using hilbert::SparseOperator;
using hilbert::Subsystem;
using liouville::EnginePath;
using liouville::IntegratorSpec;
using liouville::StationaritySpec;
using liouville::Trajectory;
using model::LindbladTerm;
using model::SystemParams;

namespace {

ComplexMatrix random_hermitian_density(Index n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ComplexMatrix g(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) g(i, j) = Complex(u(rng), u(rng));
    ComplexMatrix rho = g * g.adjoint();
    rho /= rho.trace();
    return rho;
}

SystemParams small_renorm_params() {
    SystemParams p;
    p.omega_z = 50.0;
    p.delta = 50.0;
    p.g_a = 3.0;
    p.g_b = 1.0;
    p.g_ab = std::sqrt(3.0);
    p.gamma_a = 1.0;
    p.gamma_b = 1.0;
    p.Gamma = 5.0;
    p.nbar_a = 2.0;
    p.nbar_b = 1.0;
    return p;
}

}  // namespace

TEST_CASE("dissipator annihilates its dark state and relaxes the excited spin") {
    const SparseOperator a = hilbert::annihilation(5);
    ComplexMatrix ground = ComplexMatrix::Zero(5, 5);
    ground(0, 0) = 1.0;
    CHECK(liouville::dissipator(a, ground).norm() == doctest::Approx(0.0));

    // D_{sigma-}(|e><e|) = 2(|g><g| - |e><e|)
    const SparseOperator sm = hilbert::sigma_minus();
    ComplexMatrix excited = ComplexMatrix::Zero(2, 2);
    excited(1, 1) = 1.0;
    ComplexMatrix expected = ComplexMatrix::Zero(2, 2);
    expected(0, 0) = 2.0;
    expected(1, 1) = -2.0;
    CHECK((liouville::dissipator(sm, excited) - expected).norm() < 1e-14);
}

TEST_CASE("lindblad_rhs is trace-free and Hermitian on physical states") {
    const SpaceLayout layout = SpaceLayout::spin_a_b(3, 3);
    const SystemParams p = small_renorm_params();
    const SparseOperator h = model::build_h0(p, layout) + model::build_h1_full(p, layout);
    const auto terms = model::build_collapse_terms(p, layout);

    const ComplexMatrix rho = random_hermitian_density(layout.total_dim(), 7);
    const ComplexMatrix drho = liouville::lindblad_rhs(rho, h, terms);
    CHECK(std::abs(drho.trace()) < 1e-10);
    CHECK(hilbert::hermiticity_error(drho) < 1e-10);

    // matches the literal dense formula term by term
    ComplexMatrix manual = Complex(0, -1) * (h.dense() * rho - rho * h.dense());
    for (const auto& t : terms) {
        const ComplexMatrix x = t.op.dense();
        manual += t.weight *
                  (2.0 * x * rho * x.adjoint() - x.adjoint() * x * rho - rho * x.adjoint() * x);
    }
    CHECK((drho - manual).norm() < 1e-12);
}

TEST_CASE("thermal contact: detailed balance fixed point and heating rate") {
    const Index dim = 30;
    const double gamma = 1.0, nbar = 0.5;
    const SparseOperator b = hilbert::annihilation(dim);
    const std::vector<LindbladTerm> terms = {{gamma * (1.0 + nbar), b},
                                             {gamma * nbar, b.adjoint()}};
    const SparseOperator h0(dim);  // free contact, no Hamiltonian

    // truncated thermal state is stationary up to the (negligible) top-level leak
    const ComplexMatrix th = hilbert::thermal_state(dim, nbar);
    CHECK(liouville::lindblad_rhs(th, h0, terms).norm() < 1e-12);

    // d<n>/dt from vacuum = 2 gamma nbar exactly
    ComplexMatrix vac = ComplexMatrix::Zero(dim, dim);
    vac(0, 0) = 1.0;
    const ComplexMatrix rate = liouville::lindblad_rhs(vac, h0, terms);
    const double dn = (hilbert::number_op(dim).dense() * rate).trace().real();
    CHECK(dn == doctest::Approx(2.0 * gamma * nbar).epsilon(1e-12));
}

TEST_CASE("rk4_step reproduces a pure spin rotation") {
    const SpaceLayout layout = SpaceLayout::single(Subsystem::Spin, 2);
    const double omega = 3.0;
    const SparseOperator h = hilbert::sigma_z().scaled(omega / 2.0);
    const std::vector<LindbladTerm> no_terms;

    ComplexMatrix start(2, 2);
    start << 0.5, 0.5, 0.5, 0.5;  // |+x> state
    DensityMatrix rho(layout, start);

    const double dt = 1e-3;
    const int steps = 200;
    const auto rhs = [&](const ComplexMatrix& m) { return liouville::lindblad_rhs(m, h, no_terms); };
    for (int i = 0; i < steps; ++i) rho = liouville::rk4_step(rho, dt, rhs);

    // rho_01(t) = rho_01(0) exp(+i omega t)
    const double t = dt * steps;
    const Complex expected = 0.5 * std::exp(Complex(0, omega * t));
    CHECK(std::abs(rho.matrix()(0, 1) - expected) < 1e-10);
    CHECK(rho.trace_error() < 1e-12);
}

TEST_CASE("evolve reproduces the exponential spin decay with stationarity detection") {
    const SpaceLayout layout = SpaceLayout::single(Subsystem::Spin, 2);
    const double Gamma = 5.0;
    const std::vector<LindbladTerm> terms = {{Gamma, hilbert::sigma_minus()}};
    ComplexMatrix excited = ComplexMatrix::Zero(2, 2);
    excited(1, 1) = 1.0;

    IntegratorSpec spec;  // dt = 2e-4, t = 3, stride 50
    std::map<std::string, SparseOperator> obs;
    obs.emplace("n_s", hilbert::sigma_plus() * hilbert::sigma_minus());
    const Trajectory traj = liouville::evolve(DensityMatrix(layout, excited), SparseOperator(2),
                                              terms, spec, obs);

    REQUIRE(traj.times.size() == 301);  // t=0 plus 300 records
    CHECK(traj.times.back() == doctest::Approx(3.0));
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        CHECK(traj.value(i, "n_s") == doctest::Approx(std::exp(-2.0 * Gamma * traj.times[i]))
                                          .epsilon(1e-8));

    REQUIRE(traj.stationary_at.has_value());
    CHECK(*traj.stationary_at > 0.9);
    CHECK(*traj.stationary_at < 1.2);
    CHECK(liouville::steady_state_reached(traj, "n_s", 0.3, 1e-3));
    CHECK_FALSE(liouville::steady_state_reached(traj, "n_s", 2.9, 1e-12));
    CHECK_THROWS_AS(liouville::steady_state_reached(traj, "n_s", 5.0, 1e-3),
                    std::invalid_argument);
    CHECK_THROWS_AS(traj.final_value("nope"), std::invalid_argument);
}

TEST_CASE("evolve matches the closed-form thermal relaxation curve") {
    const Index dim = 40;
    const double gamma = 1.0, nbar = 3.0;
    const SpaceLayout layout = SpaceLayout::single(Subsystem::ModeB, dim);
    const SparseOperator b = hilbert::annihilation(dim);
    const std::vector<LindbladTerm> terms = {{gamma * (1.0 + nbar), b},
                                             {gamma * nbar, b.adjoint()}};
    ComplexMatrix vac = ComplexMatrix::Zero(dim, dim);
    vac(0, 0) = 1.0;

    IntegratorSpec spec;
    std::map<std::string, SparseOperator> obs;
    obs.emplace("n", hilbert::number_op(dim));
    const Trajectory traj =
        liouville::evolve(DensityMatrix(layout, vac), SparseOperator(dim), terms, spec, obs);

    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double expected = nbar * (1.0 - std::exp(-2.0 * gamma * traj.times[i]));
        CHECK(std::abs(traj.value(i, "n") - expected) < 1e-3);
    }
    // diagnostics stay at machine level throughout
    for (double v : traj.trace_dev) CHECK(v < 1e-10);
    for (double v : traj.herm_dev) CHECK(v < 1e-12);
}

TEST_CASE("Heisenberg picture: exact free-evolution eigenoperators") {
    // single mode with thermal contact and detuning: L+(b) = -(gamma + i delta) b
    const Index dim = 7;
    const double gamma = 0.8, delta = 2.5;
    const SparseOperator b = hilbert::annihilation(dim);
    const SparseOperator h = hilbert::number_op(dim).scaled(delta);

    SUBCASE("empty bath: identity holds on every column") {
        const std::vector<LindbladTerm> terms = {{gamma, b}, {0.0, b.adjoint()}};
        const ComplexMatrix lb = liouville::adjoint_lindblad_rhs(b, h, terms);
        const ComplexMatrix expected = Complex(-gamma, -delta) * b.dense();
        CHECK((lb - expected).norm() < 1e-12);
    }

    SUBCASE("thermal bath: identity holds away from the truncation edge") {
        const double nbar = 1.5;
        const std::vector<LindbladTerm> terms = {{gamma * (1.0 + nbar), b},
                                                 {gamma * nbar, b.adjoint()}};
        const ComplexMatrix lb = liouville::adjoint_lindblad_rhs(b, h, terms);
        const ComplexMatrix expected = Complex(-gamma, -delta) * b.dense();
        for (Index col = 0; col + 1 < dim; ++col)
            CHECK((lb.col(col) - expected.col(col)).norm() < 1e-12);
        // the raising channel cannot act above the top level; the defect is
        // exactly -gamma nbar dim sqrt(dim-1) at the (dim-2, dim-1) entry
        const ComplexMatrix defect = lb - expected;
        const double top = -gamma * nbar * double(dim) * std::sqrt(double(dim - 1));
        CHECK(defect(dim - 2, dim - 1).real() == doctest::Approx(top).epsilon(1e-12));
        ComplexMatrix rest = defect;
        rest(dim - 2, dim - 1) = 0.0;
        CHECK(rest.norm() < 1e-12);
    }

    SUBCASE("number fluctuation: L+(n - nbar) = -2 gamma (n - nbar) away from the edge") {
        const double nbar = 1.5;
        const std::vector<LindbladTerm> terms = {{gamma * (1.0 + nbar), b},
                                                 {gamma * nbar, b.adjoint()}};
        const SparseOperator delta_n =
            hilbert::number_op(dim) - hilbert::identity_op(dim).scaled(nbar);
        const ComplexMatrix ld = liouville::adjoint_lindblad_rhs(delta_n, h, terms);
        const ComplexMatrix expected = Complex(-2.0 * gamma, 0.0) * delta_n.dense();
        for (Index col = 0; col + 1 < dim; ++col)
            CHECK((ld.col(col) - expected.col(col)).norm() < 1e-12);
        // top-level defect: the raising channel is cut, losing 2 gamma nbar (K+1)
        const ComplexMatrix defect = ld - expected;
        CHECK(defect(dim - 1, dim - 1).real() ==
              doctest::Approx(-2.0 * gamma * nbar * double(dim)).epsilon(1e-12));
    }
}

TEST_CASE("Heisenberg picture: spin coherence decays at (i omega_z - Gamma)") {
    // full three-part space; sigma_+ is untouched by the truncation edge
    const SpaceLayout layout = SpaceLayout::spin_a_b(4, 3);
    SystemParams p = small_renorm_params();
    const SparseOperator h0 = model::build_h0(p, layout);
    const auto terms = model::build_collapse_terms(p, layout);
    const SparseOperator sp = hilbert::embed(hilbert::sigma_plus(), Subsystem::Spin, layout);

    const ComplexMatrix lsp = liouville::adjoint_lindblad_rhs(sp, h0, terms);
    const ComplexMatrix expected = Complex(-p.Gamma, p.omega_z) * sp.dense();
    CHECK((lsp - expected).norm() < 1e-12);

    // embedded mode-a identity on interior columns of the full free Liouvillian
    const SparseOperator a = hilbert::embed(hilbert::annihilation(4), Subsystem::ModeA, layout);
    const ComplexMatrix la = liouville::adjoint_lindblad_rhs(a, h0, terms);
    const ComplexMatrix aexp = Complex(-p.gamma_a, 0.0) * a.dense();
    for (Index col = 0; col < layout.total_dim(); ++col) {
        if (layout.unravel(col)[1] == 3) continue;  // top a-level: truncation defect
        CHECK((la.col(col) - aexp.col(col)).norm() < 1e-12);
    }
}

TEST_CASE("Schrodinger and Heisenberg pictures are trace duals") {
    const SpaceLayout layout = SpaceLayout::spin_a_b(3, 3);
    const SystemParams p = small_renorm_params();
    const SparseOperator h = model::build_h0(p, layout) + model::build_h1_full(p, layout);
    const auto terms = model::build_collapse_terms(p, layout);

    for (unsigned seed = 0; seed < 5; ++seed) {
        const ComplexMatrix rho = random_hermitian_density(layout.total_dim(), 100 + seed);
        ComplexMatrix omat = random_hermitian_density(layout.total_dim(), 200 + seed);
        omat *= 3.7;  // any Hermitian observable
        const SparseOperator o = SparseOperator::from_dense(omat);

        const Complex lhs = (omat * liouville::lindblad_rhs(rho, h, terms)).trace();
        const Complex rhs = (liouville::adjoint_lindblad_rhs(o, h, terms) * rho).trace();
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("blocked and dense engines propagate identically") {
    const SpaceLayout layout = SpaceLayout::spin_a_b(6, 4);
    const SystemParams p = small_renorm_params();
    const SparseOperator h = model::build_h0(p, layout) + model::build_h1_full(p, layout);
    const auto terms = model::build_collapse_terms(p, layout);

    const ComplexMatrix rho0 = hilbert::kron(
        hilbert::kron(hilbert::thermal_state(2, 0.2), hilbert::thermal_state(6, 1.0)),
        hilbert::thermal_state(4, 0.8));
    const DensityMatrix start(layout, rho0);

    IntegratorSpec spec;
    spec.dt = 1e-3;
    spec.t_final = 0.2;
    spec.record_stride = 20;
    std::map<std::string, SparseOperator> obs;
    obs.emplace("n_a", hilbert::embed(hilbert::number_op(6), Subsystem::ModeA, layout));
    obs.emplace("n_b", hilbert::embed(hilbert::number_op(4), Subsystem::ModeB, layout));
    obs.emplace("n_s", hilbert::embed(hilbert::sigma_plus() * hilbert::sigma_minus(),
                                      Subsystem::Spin, layout));

    DensityMatrix final_dense(layout, rho0), final_blocked(layout, rho0), final_auto(layout, rho0);
    const Trajectory dense = liouville::evolve(start, h, terms, spec, obs, {}, &final_dense,
                                               EnginePath::Dense);
    const Trajectory blocked = liouville::evolve(start, h, terms, spec, obs, {}, &final_blocked,
                                                 EnginePath::Blocked);
    const Trajectory automatic =
        liouville::evolve(start, h, terms, spec, obs, {}, &final_auto, EnginePath::Auto);

    REQUIRE(dense.times.size() == blocked.times.size());
    for (std::size_t i = 0; i < dense.times.size(); ++i)
        for (std::size_t k = 0; k < dense.names.size(); ++k) {
            CHECK(std::abs(dense.records[i][k] - blocked.records[i][k]) < 1e-11);
            CHECK(std::abs(dense.records[i][k] - automatic.records[i][k]) < 1e-11);
        }
    CHECK((final_dense.matrix() - final_blocked.matrix()).cwiseAbs().maxCoeff() < 1e-11);
    CHECK(final_blocked.min_eigenvalue() > -1e-8);

    // a superposition across conserved sectors cannot use the blocked path
    ComplexMatrix coherent = ComplexMatrix::Zero(layout.total_dim(), layout.total_dim());
    const Index i0 = layout.ravel({0, 0, 0});
    const Index i1 = layout.ravel({0, 1, 0});
    coherent(i0, i0) = 0.5;
    coherent(i1, i1) = 0.5;
    coherent(i0, i1) = 0.5;
    coherent(i1, i0) = 0.5;
    const DensityMatrix cross(layout, coherent);
    CHECK_THROWS_AS(liouville::evolve(cross, h, terms, spec, obs, {}, nullptr, EnginePath::Blocked),
                    std::invalid_argument);
    // the automatic path falls back to the dense engine and handles it
    CHECK_NOTHROW(liouville::evolve(cross, h, terms, spec, obs));
}

TEST_CASE("global rate rescaling leaves trajectories invariant") {
    const SpaceLayout layout = SpaceLayout::spin_a_b(4, 3);
    const SystemParams base = small_renorm_params();

    const auto run = [&](double lambda) {
        SystemParams p = base;
        p.omega_z *= lambda;
        p.delta *= lambda;
        p.g_a *= lambda;
        p.g_b *= lambda;
        p.g_ab *= lambda;
        p.gamma_a *= lambda;
        p.gamma_b *= lambda;
        p.Gamma *= lambda;
        const SparseOperator h = model::build_h0(p, layout) + model::build_h1_full(p, layout);
        const auto terms = model::build_collapse_terms(p, layout);
        const ComplexMatrix rho0 = hilbert::kron(
            hilbert::kron(hilbert::thermal_state(2, 0.0), hilbert::thermal_state(4, 1.0)),
            hilbert::thermal_state(3, 0.5));
        IntegratorSpec spec;
        spec.dt = 1e-3 / lambda;
        spec.t_final = 0.5 / lambda;
        spec.record_stride = 25;
        std::map<std::string, SparseOperator> obs;
        obs.emplace("n_b", hilbert::embed(hilbert::number_op(3), Subsystem::ModeB, layout));
        return liouville::evolve(DensityMatrix(layout, rho0), h, terms, spec, obs);
    };

    const Trajectory t1 = run(1.0);
    const Trajectory t2 = run(2.0);  // power of two: exact in floating point
    const Trajectory t3 = run(3.0);
    REQUIRE(t1.times.size() == t2.times.size());
    for (std::size_t i = 0; i < t1.times.size(); ++i) {
        CHECK(t1.records[i][0] == t2.records[i][0]);
        CHECK(std::abs(t1.records[i][0] - t3.records[i][0]) < 1e-9);
    }
}

TEST_CASE("integrator guards: spec validation and instability detection") {
    IntegratorSpec bad;
    bad.dt = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = IntegratorSpec{};
    bad.t_final = 1.0001e-4;  // not a multiple of dt
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    // a stiff dissipator integrated far beyond the RK4 stability radius
    const Index dim = 12;
    const SparseOperator b = hilbert::annihilation(dim);
    const std::vector<LindbladTerm> terms = {{30.0, b}, {29.0, b.adjoint()}};
    IntegratorSpec spec;
    spec.dt = 0.05;
    spec.t_final = 50.0;
    spec.record_stride = 100;
    std::map<std::string, SparseOperator> obs;
    obs.emplace("n", hilbert::number_op(dim));
    const ComplexMatrix th = hilbert::thermal_state(dim, 1.0);
    CHECK_THROWS_AS(liouville::evolve(DensityMatrix(SpaceLayout::single(Subsystem::ModeB, dim), th),
                                      SparseOperator(dim), terms, spec, obs),
                    NumericError);
}

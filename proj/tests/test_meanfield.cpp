#include <doctest.h>

#include <cmath>
#include <random>

#include "nvcool/errors.hpp"
#include "nvcool/meanfield.hpp"

using namespace nvcool;
using liouville::IntegratorSpec;
using liouville::StationaritySpec;
using meanfield::MeanFieldState;
using meanfield::QuadraticCoeffs;
using reduced::ReducedParams;

namespace {

ReducedParams hot_point() {
    ReducedParams p;
    p.omega_z = 2.0e7;
    p.delta = 2.0e7;
    p.g_a = 3.0;
    p.g_ab = std::sqrt(3.0);
    p.gamma_a = 1.0;
    p.gamma_b = 1.0;
    p.Gamma = 30.0;
    p.nbar_a = 160.0;
    p.nbar_b = 7.0;
    return p;
}

}  // namespace

TEST_CASE("stationary quadratic: hand-computed coefficients and root") {
    // kappa = 32, g_ab^2 = 3, nbar_a = 160, nbar_b = 7, Gamma = 30, ns = 0:
    //   A = -3*321/32, B = (3/32)(2240 + 7 - 160 - 4800 - 30) - 30, C = 105 + 210
    const QuadraticCoeffs q = meanfield::quadratic_coeffs(hot_point(), 0.0);
    CHECK(q.A == doctest::Approx(-963.0 / 32.0).epsilon(1e-14));
    CHECK(q.B == doctest::Approx(-287.15625).epsilon(1e-14));
    CHECK(q.C == doctest::Approx(315.0).epsilon(1e-14));
    CHECK(meanfield::stationary_nb(q) == doctest::Approx(0.99352).epsilon(1e-4));

    // the ns_prime-aware overload changes nothing at omega_z = 2e7
    CHECK(meanfield::stationary_nb(hot_point()) ==
          doctest::Approx(meanfield::stationary_nb(q)).epsilon(1e-6));
}

TEST_CASE("factorized rates at hand-picked points") {
    ReducedParams p = hot_point();
    p.nbar_a = 4.0;
    p.nbar_b = 1.0;
    p.Gamma = 50.0;  // kappa = 52

    // at (n_s, n_b) = (0, 1): mix = -(nbar_a + 1), swap = 6/52
    const auto [dns, dnb] = meanfield::mean_field_rhs({0.0, 1.0}, p, 0.0);
    CHECK(dns == doctest::Approx(30.0 / 52.0).epsilon(1e-14));
    CHECK(dnb == doctest::Approx(-30.0 / 52.0).epsilon(1e-14));

    // an empty spin with populated b is always pumped up
    const auto [up, unused] = meanfield::mean_field_rhs({0.0, 0.3}, p, 0.0);
    (void)unused;
    CHECK(up > 0.0);

    // decoupled thermal equilibrium is an exact fixed point
    ReducedParams dec = hot_point();
    dec.g_ab = 0.0;
    const auto [fs, fb] = meanfield::mean_field_rhs({0.0, dec.nbar_b}, dec, 0.0);
    CHECK(fs == 0.0);
    CHECK(fb == 0.0);
}

TEST_CASE("time integration lands on the analytic stationary point") {
    const ReducedParams p = hot_point();
    IntegratorSpec spec;
    spec.t_final = 10.0;

    const auto traj = meanfield::evolve_mean_field({0.0, p.nbar_b}, p, spec);
    CHECK(traj.stationary_at.has_value());
    CHECK(std::abs(traj.final_state().n_b - meanfield::stationary_nb(p)) < 1e-6);
    CHECK(std::abs(traj.final_state().n_s -
                   meanfield::stationary_ns(p, traj.final_state().n_b)) < 1e-6);

    // randomized parameter sets: the root always agrees with the dynamics
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        ReducedParams r = hot_point();
        r.nbar_a = 200.0 * u(rng);
        r.nbar_b = 10.0 * u(rng);
        r.Gamma = 1.0 + 99.0 * u(rng);
        r.gamma_a = 0.5 + 1.5 * u(rng);
        r.gamma_b = 0.5 + 1.5 * u(rng);
        r.g_ab = std::sqrt(0.5 + 4.5 * u(rng));
        IntegratorSpec long_spec;
        long_spec.t_final = 15.0;
        const auto t = meanfield::evolve_mean_field({0.0, r.nbar_b}, r, long_spec);
        const double target = meanfield::stationary_nb(r);
        CHECK(std::abs(t.final_state().n_b - target) < 1e-4 * (1.0 + target));
    }
}

TEST_CASE("moderate separation: monotone cooling onto the stationary value") {
    ReducedParams p = hot_point();
    p.omega_z = 500.0;
    p.delta = 500.0;
    p.nbar_a = 4.0;
    p.nbar_b = 1.0;
    p.Gamma = 50.0;

    IntegratorSpec spec;
    spec.t_final = 6.0;
    StationaritySpec stat;
    stat.observable = "n_s";  // the alternate observable is accepted too
    const auto traj = meanfield::evolve_mean_field({0.0, 1.0}, p, spec, stat);

    for (std::size_t i = 1; i < traj.states.size(); ++i)
        CHECK(traj.states[i].n_b <= traj.states[i - 1].n_b + 1e-12);
    CHECK(traj.final_state().n_b == doctest::Approx(0.77864).epsilon(1e-3));
    CHECK(traj.stationary_at.has_value());
}

TEST_CASE("decoupled modes follow their closed forms") {
    ReducedParams p = hot_point();
    p.g_ab = 0.0;
    p.Gamma = 2.0;
    p.nbar_b = 1.5;

    IntegratorSpec spec;  // dt = 2e-4, t = 3
    const auto traj = meanfield::evolve_mean_field({1.0, 0.0}, p, spec);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        CHECK(std::abs(traj.states[i].n_s - std::exp(-2.0 * p.Gamma * t)) < 1e-6);
        CHECK(std::abs(traj.states[i].n_b - p.nbar_b * (1.0 - std::exp(-2.0 * p.gamma_b * t))) <
              1e-9);
    }
}

TEST_CASE("breakdown guard raises NumericError") {
    const ReducedParams p = hot_point();
    IntegratorSpec spec;

    // invalid initial data is rejected before the first step
    CHECK_THROWS_AS(meanfield::evolve_mean_field({-0.5, 1.0}, p, spec), NumericError);
    CHECK_THROWS_AS(meanfield::evolve_mean_field({1.5, 1.0}, p, spec), NumericError);

    // a step far beyond the stability radius blows up the trajectory
    IntegratorSpec coarse;
    coarse.dt = 0.05;
    coarse.t_final = 50.0;
    coarse.record_stride = 100;
    CHECK_THROWS_AS(meanfield::evolve_mean_field({0.0, p.nbar_b}, p, coarse), NumericError);
}

TEST_CASE("hot-mode asymptote and the one-phonon threshold") {
    SUBCASE("cooling_threshold is the exact one-phonon crossing") {
        for (double nbar_b : {2.0, 7.0, 70.0, 1000.0})
            for (double gamma_b : {0.37, 1.0, 4.0}) {
                const double thr = meanfield::cooling_threshold(nbar_b, gamma_b);
                CHECK(thr == doctest::Approx(3.0 * gamma_b * (nbar_b - 1.0)).epsilon(1e-14));
                CHECK(std::abs(meanfield::asymptotic_nb(nbar_b, gamma_b, thr) - 1.0) < 1e-12);
                // crossing is transversal: below threshold stays above one phonon
                CHECK(meanfield::asymptotic_nb(nbar_b, gamma_b, thr - 0.01 * gamma_b) > 1.0);
                CHECK(meanfield::asymptotic_nb(nbar_b, gamma_b, thr + 0.01 * gamma_b) < 1.0);
            }
    }

    SUBCASE("hand value at Gamma = gamma_b") {
        // u = 7 - 1 = 6 phonons, asymptote (6 + sqrt(50))/2
        CHECK(meanfield::asymptotic_nb(7.0, 1.3, 1.3) ==
              doctest::Approx(0.5 * (6.0 + std::sqrt(50.0))).epsilon(1e-14));
    }

    SUBCASE("already below one phonon: threshold clamps to zero") {
        CHECK(meanfield::cooling_threshold(1.0, 2.0) == 0.0);
        CHECK(meanfield::cooling_threshold(0.4, 2.0) == 0.0);
    }

    SUBCASE("guards") {
        CHECK_THROWS_AS(meanfield::asymptotic_nb(7.0, 0.0, 10.0), ConfigError);
    }

    SUBCASE("the full stationary point approaches the asymptote for huge nbar_a") {
        ReducedParams p = hot_point();
        p.nbar_a = 1.0e8;
        const double exact = meanfield::stationary_nb(meanfield::quadratic_coeffs(p, 0.0));
        const double limit = meanfield::asymptotic_nb(p.nbar_b, p.gamma_b, p.Gamma);
        CHECK(std::abs(exact - limit) / limit < 1e-3);
    }
}

TEST_CASE("quadratic structure guarantees a unique physical root") {
    for (double nbar_a : {0.5, 4.0, 40.0, 160.0, 1.0e4})
        for (double nbar_b : {0.3, 1.0, 7.0, 70.0})
            for (double Gamma : {1.0, 30.0, 300.0}) {
                ReducedParams p = hot_point();
                p.nbar_a = nbar_a;
                p.nbar_b = nbar_b;
                p.Gamma = Gamma;
                const QuadraticCoeffs q = meanfield::quadratic_coeffs(p);
                CHECK(q.A < 0.0);
                CHECK(q.C >= 0.0);
                const double root = meanfield::stationary_nb(q);
                CHECK(root >= 0.0);
                // residual of the quadratic at the returned root is tiny
                const double scale = std::abs(q.A) * root * root + std::abs(q.B) * root + q.C;
                CHECK(std::abs((q.A * root + q.B) * root + q.C) < 1e-12 * scale);
                // the consistent spin excitation stays in the physical band
                if (nbar_a >= nbar_b) {
                    const double ns = meanfield::stationary_ns(p, root);
                    CHECK(ns >= 0.0);
                    CHECK(ns < 0.5);
                    CHECK(root <= nbar_b + 1e-12);
                }
            }
}

TEST_CASE("cooling improves monotonically with the hot-mode occupation") {
    ReducedParams p = hot_point();
    double prev = p.nbar_b + 1.0;
    for (double nbar_a = 1.0; nbar_a <= 1.0e6; nbar_a *= 4.0) {
        p.nbar_a = nbar_a;
        const double nb = meanfield::stationary_nb(meanfield::quadratic_coeffs(p, 0.0));
        CHECK(nb <= prev + 1e-12);
        prev = nb;
    }
}

TEST_CASE("stationary point is insensitive to the tiny physical ns_prime") {
    ReducedParams p = hot_point();
    for (double Gamma : {30.0, 300.0, 500.0}) {
        p.Gamma = Gamma;
        const double with0 = meanfield::stationary_nb(meanfield::quadratic_coeffs(p, 0.0));
        const double withp = meanfield::stationary_nb(p);
        CHECK(std::abs(with0 - withp) < 1e-6);
    }
}

TEST_CASE("degenerate limits of the stationary solver") {
    SUBCASE("no swap coupling: mode b stays at its bath occupation") {
        ReducedParams p = hot_point();
        p.g_ab = 0.0;
        CHECK(meanfield::stationary_nb(p) == doctest::Approx(p.nbar_b).epsilon(1e-14));
    }

    SUBCASE("no swap and no b damping: every occupation is stationary") {
        ReducedParams p = hot_point();
        p.g_ab = 0.0;
        p.gamma_b = 0.0;
        CHECK_THROWS_AS(meanfield::stationary_nb(p), NumericError);
    }
}

TEST_CASE("optimal spin damping search") {
    SUBCASE("flat profile warns and returns the range minimum") {
        ReducedParams p = hot_point();
        p.g_ab = 0.0;
        const auto res = meanfield::optimal_gamma(p, 1.0, 100.0);
        CHECK(res.flat);
        CHECK(res.gamma == 1.0);
        CHECK(res.nb == doctest::Approx(p.nbar_b));
        CHECK_FALSE(res.warnings.empty());
    }

    SUBCASE("interior minimum is bracketed and beats the endpoints") {
        ReducedParams p = hot_point();
        p.nbar_a = 300.0;
        p.nbar_b = 7.0;
        const auto res = meanfield::optimal_gamma(p, 1.0, 1000.0);
        CHECK(res.unimodal);
        CHECK_FALSE(res.flat);
        CHECK(res.gamma > 1.0);
        CHECK(res.gamma < 1000.0);
        ReducedParams at = p;
        at.Gamma = 1.0;
        CHECK(res.nb < meanfield::stationary_nb(at));
        at.Gamma = 1000.0;
        CHECK(res.nb < meanfield::stationary_nb(at));
        at.Gamma = res.gamma;
        CHECK(res.nb == doctest::Approx(meanfield::stationary_nb(at)).epsilon(1e-12));
        // refinement actually sits at a local minimum of the profile
        at.Gamma = res.gamma * 1.02;
        CHECK(meanfield::stationary_nb(at) >= res.nb - 1e-12);
        at.Gamma = res.gamma / 1.02;
        CHECK(meanfield::stationary_nb(at) >= res.nb - 1e-12);
    }

    SUBCASE("invalid range throws") {
        CHECK_THROWS_AS(meanfield::optimal_gamma(hot_point(), 10.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(meanfield::optimal_gamma(hot_point(), 0.0, 1.0), std::invalid_argument);
    }
}

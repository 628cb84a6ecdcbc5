#include "nvcool/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nvcool/errors.hpp"

namespace nvcool::meanfield {

using reduced::ns_prime;

// ----- trajectory -----

const MeanFieldState& MeanFieldTrajectory::final_state() const {
    if (states.empty()) throw std::invalid_argument("MeanFieldTrajectory: empty");
    return states.back();
}

// ----- rates -----

std::pair<double, double> mean_field_rhs(const MeanFieldState& s, const ReducedParams& p) {
    return mean_field_rhs(s, p, ns_prime(p));
}

std::pair<double, double> mean_field_rhs(const MeanFieldState& s, const ReducedParams& p,
                                         double ns) {
    const double kap = p.kappa();
    if (!(kap > 0)) throw ConfigError("mean_field_rhs: kappa must be > 0");
    const double swap = 2.0 * p.g_ab * p.g_ab / kap;
    const double mix = (2.0 * p.nbar_a + 1.0) * s.n_b * s.n_s + p.nbar_a * s.n_s -
                       (p.nbar_a + 1.0) * s.n_b;
    const double dns = -swap * mix + 2.0 * p.Gamma * (ns - (2.0 * ns + 1.0) * s.n_s);
    const double dnb = swap * mix + 2.0 * p.gamma_b * (p.nbar_b - s.n_b);
    return {dns, dnb};
}

// ----- ODE propagation -----

MeanFieldTrajectory evolve_mean_field(const MeanFieldState& initial, const ReducedParams& p,
                                      const IntegratorSpec& spec,
                                      const StationaritySpec& stationarity) {
    spec.validate();
    const double ns = p.Gamma > 0 ? ns_prime(p) : 0.0;
    const auto rhs = [&](const MeanFieldState& s) { return mean_field_rhs(s, p, ns); };

    MeanFieldTrajectory traj;
    MeanFieldState y = initial;
    const long steps = spec.total_steps();
    const double dt = spec.dt;

    const auto check = [&](const MeanFieldState& s, double t) {
        if (s.n_b < -1e-9 || s.n_s < -1e-9 || s.n_s > 1.0 + 1e-9)
            throw NumericError("evolve_mean_field: state left the physical region at t = " +
                               std::to_string(t) + " (factorized model breakdown)");
    };
    const auto record = [&](long step) {
        traj.times.push_back(double(step) * dt);
        traj.states.push_back(y);
    };

    check(y, 0.0);
    record(0);
    for (long step = 1; step <= steps; ++step) {
        const auto [k1s, k1b] = rhs(y);
        const auto [k2s, k2b] = rhs({y.n_s + 0.5 * dt * k1s, y.n_b + 0.5 * dt * k1b});
        const auto [k3s, k3b] = rhs({y.n_s + 0.5 * dt * k2s, y.n_b + 0.5 * dt * k2b});
        const auto [k4s, k4b] = rhs({y.n_s + dt * k3s, y.n_b + dt * k3b});
        y.n_s += dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        y.n_b += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        check(y, double(step) * dt);
        if (step % spec.record_stride == 0 || step == steps) record(step);
    }

    // trailing-window stationarity on the recorded series
    const bool on_ns = stationarity.observable == "n_s";
    if (!stationarity.observable.empty() && !on_ns && stationarity.observable != "n_b")
        throw std::invalid_argument("evolve_mean_field: unknown observable '" +
                                    stationarity.observable + "'");
    const double window = stationarity.window > 0 ? stationarity.window : 0.1 * spec.t_final;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (traj.times[i] - traj.times.front() < window) continue;
        double lo = on_ns ? traj.states[i].n_s : traj.states[i].n_b;
        double hi = lo;
        for (std::size_t j = i; j-- > 0;) {
            if (traj.times[i] - traj.times[j] > window) break;
            const double v = on_ns ? traj.states[j].n_s : traj.states[j].n_b;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo < stationarity.tol) {
            traj.stationary_at = traj.times[i];
            break;
        }
    }
    return traj;
}

// ----- stationary quadratic -----

QuadraticCoeffs quadratic_coeffs(const ReducedParams& p) {
    return quadratic_coeffs(p, ns_prime(p));
}

QuadraticCoeffs quadratic_coeffs(const ReducedParams& p, double ns) {
    const double kap = p.kappa();
    if (!(kap > 0)) throw ConfigError("quadratic_coeffs: kappa must be > 0");
    const double g2k = p.g_ab * p.g_ab / kap;
    const double gb = p.gamma_b;
    const double G = p.Gamma;
    QuadraticCoeffs q;
    q.A = -gb * p.g_ab * p.g_ab * (2.0 * p.nbar_a + 1.0) / kap;
    q.B = g2k * (2.0 * p.nbar_a * p.nbar_b * gb + p.nbar_b * gb - p.nbar_a * gb - G * p.nbar_a -
                 G * ns - G) -
          gb * G * (2.0 * ns + 1.0);
    q.C = g2k * p.nbar_a * (gb * p.nbar_b + G * ns) + gb * p.nbar_b * G * (2.0 * ns + 1.0);
    return q;
}

double stationary_nb(const QuadraticCoeffs& q) {
    if (q.A == 0.0) {
        if (q.B == 0.0) throw NumericError("stationary_nb: degenerate quadratic (A = B = 0)");
        return std::max(0.0, -q.C / q.B);
    }
    double disc = q.B * q.B - 4.0 * q.A * q.C;
    if (disc < 0) {
        if (disc > -1e-12 * q.B * q.B)
            disc = 0.0;  // roundoff double root
        else
            throw NumericError("stationary_nb: negative discriminant (internal invariant)");
    }
    const double s = std::sqrt(disc);
    const double half = -0.5 * (q.B + std::copysign(s, q.B));  // cancellation-free branch
    if (half == 0.0) return 0.0;                               // B = 0, disc = 0 => C = 0, root 0
    const double r1 = half / q.A;
    const double r2 = q.C / half;
    const double tol = -1e-9;
    const bool ok1 = r1 >= tol;
    const bool ok2 = r2 >= tol;
    if (ok1 && ok2) return std::max(0.0, std::min(r1, r2));
    if (ok1) return std::max(0.0, r1);
    if (ok2) return std::max(0.0, r2);
    throw NumericError("stationary_nb: no nonnegative root (internal invariant)");
}

double stationary_nb(const ReducedParams& p) { return stationary_nb(quadratic_coeffs(p)); }

double stationary_ns(const ReducedParams& p, double n_b) {
    return stationary_ns(p, n_b, ns_prime(p));
}

double stationary_ns(const ReducedParams& p, double n_b, double ns) {
    const double kap = p.kappa();
    if (!(kap > 0)) throw ConfigError("stationary_ns: kappa must be > 0");
    const double g2k = p.g_ab * p.g_ab / kap;
    const double num = g2k * (p.nbar_a + 1.0) * n_b + p.Gamma * ns;
    const double den = g2k * ((2.0 * p.nbar_a + 1.0) * n_b + p.nbar_a) + p.Gamma * (2.0 * ns + 1.0);
    if (den == 0.0) return 0.0;  // all couplings and rates vanish
    return num / den;
}

// ----- asymptotics and threshold -----

double asymptotic_nb(double nbar_b, double gamma_b, double Gamma) {
    if (!(gamma_b > 0)) throw ConfigError("asymptotic_nb: gamma_b must be > 0");
    const double u = nbar_b - (gamma_b + Gamma) / (2.0 * gamma_b);
    return 0.5 * (u + std::sqrt(u * u + 2.0 * nbar_b));
}

double cooling_threshold(double nbar_b, double gamma_b) {
    return std::max(0.0, 3.0 * gamma_b * (nbar_b - 1.0));
}

// ----- optimal spin damping -----

GammaSearchResult optimal_gamma(const ReducedParams& p, double gamma_lo, double gamma_hi) {
    if (!(gamma_lo > 0) || !(gamma_hi > gamma_lo) || !std::isfinite(gamma_hi))
        throw std::invalid_argument("optimal_gamma: need 0 < gamma_lo < gamma_hi, finite");

    const auto f = [&](double gamma) {
        ReducedParams q = p;
        q.Gamma = gamma;
        return stationary_nb(q);
    };

    constexpr int kGrid = 65;
    const double llo = std::log(gamma_lo), lhi = std::log(gamma_hi);
    std::vector<double> gs(kGrid), fs(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        gs[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (kGrid - 1));
        fs[static_cast<std::size_t>(i)] = f(gs[static_cast<std::size_t>(i)]);
    }
    gs.front() = gamma_lo;  // exact endpoints
    gs.back() = gamma_hi;

    GammaSearchResult res;
    const auto best = std::min_element(fs.begin(), fs.end());  // ties toward smaller Gamma
    const std::size_t bi = static_cast<std::size_t>(best - fs.begin());

    const double spread = *std::max_element(fs.begin(), fs.end()) - *best;
    if (spread <= 1e-10 * std::max(1.0, std::abs(*best))) {
        res.flat = true;
        res.gamma = gamma_lo;
        res.nb = fs.front();
        res.warnings.push_back("optimal_gamma: flat profile over the range; returning range minimum");
        return res;
    }

    // local minima on the coarse grid (plateaus collapse to one)
    int minima = 0;
    int prev = 0;  // sign of the last nonzero difference
    for (int i = 1; i < kGrid; ++i) {
        const double d = fs[static_cast<std::size_t>(i)] - fs[static_cast<std::size_t>(i - 1)];
        const int sign = d > 0 ? 1 : (d < 0 ? -1 : 0);
        if (sign == 0) continue;
        if (sign > 0 && prev <= 0) ++minima;  // ascent after descent (or from the left edge)
        prev = sign;
    }
    if (prev < 0) ++minima;  // still descending at the right edge
    if (minima > 1) {
        res.unimodal = false;
        res.gamma = gs[bi];
        res.nb = fs[bi];
        res.warnings.push_back(
            "optimal_gamma: profile not unimodal on the coarse grid; returning global grid minimum");
        return res;
    }

    // golden-section refinement in log Gamma around the best grid point
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(gs[bi > 0 ? bi - 1 : 0]);
    double b = std::log(gs[std::min<std::size_t>(bi + 1, kGrid - 1)]);
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = f(std::exp(x1)), f2 = f(std::exp(x2));
    while (b - a > 1e-4) {
        if (f1 <= f2) {  // ties toward smaller Gamma
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(std::exp(x2));
        }
    }
    res.gamma = std::exp(0.5 * (a + b));
    res.nb = f(res.gamma);
    // keep the better of probe vs midpoint, still preferring smaller Gamma
    if (f1 < res.nb || (f1 == res.nb && std::exp(x1) < res.gamma)) {
        res.gamma = std::exp(x1);
        res.nb = f1;
    }
    return res;
}

}  // namespace nvcool::meanfield

#include "nvcool/commands.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "nvcool/errors.hpp"
#include "nvcool/meanfield.hpp"
#include "nvcool/model.hpp"
#include "nvcool/reduced.hpp"
#include "nvcool/version.hpp"

namespace nvcool::commands {

using config::SweepAxis;
using hilbert::ComplexMatrix;
using hilbert::DensityMatrix;
using hilbert::Index;
using hilbert::SpaceLayout;
using hilbert::SparseOperator;
using hilbert::Subsystem;
using liouville::Trajectory;
using meanfield::stationary_nb;
using model::SystemParams;
using reduced::ReducedParams;
using table::format_real;

namespace {

// ----- shared plumbing -----

std::vector<std::string> resolved_header(const RunSpec& spec) {
    std::vector<std::string> h;
    h.push_back(std::string("nvcool ") + kVersion);
    h.push_back("mode = " + spec.mode);
    h.push_back(std::string("units = ") + (spec.renormalized ? "renormalized (gamma_b = 1)"
                                                             : "angular (rad/s)"));
    const SystemParams& p = spec.params;
    if (spec.mode != "derive-params") {
        h.push_back("omega_z = " + format_real(p.omega_z));
        h.push_back("delta = " + format_real(p.delta));
        h.push_back("g_a = " + format_real(p.g_a));
        h.push_back("g_b = " + format_real(p.g_b));
        h.push_back("g_ab = " + format_real(p.g_ab));
        h.push_back("gamma_a = " + format_real(p.gamma_a));
        h.push_back("gamma_b = " + format_real(p.gamma_b));
        h.push_back("Gamma = " + format_real(p.Gamma));
        h.push_back("nbar_a = " + format_real(p.nbar_a));
        h.push_back("nbar_b = " + format_real(p.nbar_b));
    }
    if (spec.truncation.dim_a > 0) h.push_back("dim_a = " + std::to_string(spec.truncation.dim_a));
    if (spec.truncation.dim_b > 0) h.push_back("dim_b = " + std::to_string(spec.truncation.dim_b));
    if (!spec.profile.empty()) h.push_back("profile = " + spec.profile);
    const bool evolves = spec.mode.rfind("evolve", 0) == 0 || spec.mode == "compare";
    if (evolves) {
        h.push_back("dt = " + format_real(spec.integrator.dt));
        h.push_back("t_final = " + format_real(spec.integrator.t_final));
        h.push_back("record_stride = " + std::to_string(spec.integrator.record_stride));
    }
    for (const auto& w : spec.warnings) h.push_back("warning: " + w);
    return h;
}

// Order-preserving bounded worker pool over [0, n); rethrows the first
// worker exception after joining.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const int workers = static_cast<int>(std::min<std::size_t>(std::max(threads, 1), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

const SweepAxis& single_axis(const RunSpec& spec, const std::string& name) {
    if (spec.sweep.size() != 1 || spec.sweep.front().name != name)
        throw ConfigError(spec.mode + ": sweep must be over '" + name + "' only");
    return spec.sweep.front();
}

DensityMatrix product_state(const SpaceLayout& layout, bool spin_excited, double n_a, double n_b) {
    ComplexMatrix spin = ComplexMatrix::Zero(2, 2);
    spin(spin_excited ? 1 : 0, spin_excited ? 1 : 0) = 1.0;
    ComplexMatrix rho = spin;
    if (layout.has(Subsystem::ModeA))
        rho = hilbert::kron(rho, hilbert::thermal_state(layout.dim_of(Subsystem::ModeA), n_a));
    if (layout.has(Subsystem::ModeB))
        rho = hilbert::kron(rho, hilbert::thermal_state(layout.dim_of(Subsystem::ModeB), n_b));
    return DensityMatrix(layout, std::move(rho));
}

liouville::StationaritySpec stationarity_for(const RunSpec& spec, const std::string& fallback) {
    liouville::StationaritySpec st = spec.stationarity;
    if (st.observable.empty()) st.observable = fallback;
    return st;
}

void append_trajectory_footer(Table& t, const Trajectory& traj) {
    if (traj.stationary_at)
        t.footer.push_back("stationary_at = " + format_real(*traj.stationary_at));
    else
        t.footer.push_back("stationary_at = none (not stationary within t_final)");
    for (std::size_t k = 0; k < traj.names.size(); ++k)
        t.footer.push_back("final " + traj.names[k] + " = " + format_real(traj.records.back()[k]));
    double max_trace = 0.0, max_herm = 0.0;
    for (double v : traj.trace_dev) max_trace = std::max(max_trace, v);
    for (double v : traj.herm_dev) max_herm = std::max(max_herm, v);
    t.footer.push_back("max |tr rho - 1| = " + format_real(max_trace));
    t.footer.push_back("max hermiticity deviation = " + format_real(max_herm));
}

// Full-model stationary occupation of mode b for one parameter point.
struct FullPointResult {
    double nb_final = 0.0;
    bool stationary = false;
};

FullPointResult full_model_nb(const SystemParams& p, Index dim_a, Index dim_b,
                              const config::InitialState& initial,
                              const liouville::IntegratorSpec& integ,
                              const liouville::StationaritySpec& stationarity) {
    const SpaceLayout layout = SpaceLayout::spin_a_b(dim_a, dim_b);
    const SparseOperator h = model::build_h0(p, layout) + model::build_h1_full(p, layout);
    const auto terms = model::build_collapse_terms(p, layout);
    const DensityMatrix rho0 = product_state(layout, initial.spin_excited,
                                             initial.n_a.value_or(p.nbar_a),
                                             initial.n_b.value_or(p.nbar_b));
    std::map<std::string, SparseOperator> obs;
    obs.emplace("n_b", hilbert::embed(hilbert::number_op(dim_b), Subsystem::ModeB, layout));
    const Trajectory traj = liouville::evolve(rho0, h, terms, integ, obs, stationarity);
    return {traj.final_value("n_b"), traj.stationary_at.has_value()};
}

}  // namespace

// ----- analytic-sweep -----

Table cmd_analytic_sweep(const RunSpec& spec) {
    if (spec.mode != "analytic-sweep")
        throw std::invalid_argument("cmd_analytic_sweep: wrong mode '" + spec.mode + "'");
    std::vector<double> grid;
    if (spec.sweep.empty())
        grid.push_back(spec.params.nbar_a);
    else
        grid = single_axis(spec, "nbar_a").values;

    Table t;
    t.header = resolved_header(spec);
    t.columns = {"nbar_a", "nb_stationary", "ns_stationary", "A", "B", "C"};
    for (double v : grid) {
        SystemParams p = spec.params;
        p.nbar_a = v;
        const ReducedParams r = ReducedParams::from_system(p);
        const auto q = meanfield::quadratic_coeffs(r);
        const double nb = stationary_nb(q);
        const double ns = meanfield::stationary_ns(r, nb);
        t.rows.push_back({v, nb, ns, q.A, q.B, q.C});
    }
    return t;
}

// ----- gamma-sweep -----

Table cmd_gamma_sweep(const RunSpec& spec) {
    if (spec.mode != "gamma-sweep")
        throw std::invalid_argument("cmd_gamma_sweep: wrong mode '" + spec.mode + "'");
    std::vector<double> grid;
    if (spec.sweep.empty())
        grid.push_back(spec.params.Gamma);
    else
        grid = single_axis(spec, "Gamma").values;

    Table t;
    t.header = resolved_header(spec);
    t.columns = {"Gamma", "nb_stationary", "nb_asymptotic"};
    for (double gamma : grid) {
        SystemParams p = spec.params;
        p.Gamma = gamma;
        const double nb = stationary_nb(ReducedParams::from_system(p));
        const double asym = meanfield::asymptotic_nb(p.nbar_b, p.gamma_b, gamma);
        t.rows.push_back({gamma, nb, asym});
    }

    // summary row: the optimal Gamma over the swept range
    const auto [lo_it, hi_it] = std::minmax_element(grid.begin(), grid.end());
    if (*lo_it < *hi_it) {
        const auto best =
            meanfield::optimal_gamma(ReducedParams::from_system(spec.params), *lo_it, *hi_it);
        t.rows.push_back(
            {best.gamma, best.nb, meanfield::asymptotic_nb(spec.params.nbar_b, spec.params.gamma_b,
                                                           best.gamma)});
        for (const auto& w : best.warnings) t.footer.push_back("warning: " + w);
    } else {
        t.rows.push_back(t.rows.back());
    }
    t.footer.push_back("last row is the optimal-Gamma summary over the swept range");
    return t;
}

// ----- evolve (full | reduced | meanfield) -----

namespace {

Table evolve_full_table(const RunSpec& spec) {
    const Index da = spec.truncation.dim_a, db = spec.truncation.dim_b;
    const SpaceLayout layout = SpaceLayout::spin_a_b(da, db);
    const SystemParams& p = spec.params;
    const SparseOperator h = model::build_h0(p, layout) + model::build_h1_full(p, layout);
    const auto terms = model::build_collapse_terms(p, layout);
    const DensityMatrix rho0 = product_state(layout, spec.initial.spin_excited,
                                             spec.initial.n_a.value_or(p.nbar_a),
                                             spec.initial.n_b.value_or(p.nbar_b));
    std::map<std::string, SparseOperator> obs;
    obs.emplace("n_a", hilbert::embed(hilbert::number_op(da), Subsystem::ModeA, layout));
    obs.emplace("n_b", hilbert::embed(hilbert::number_op(db), Subsystem::ModeB, layout));
    obs.emplace("n_s", hilbert::embed(hilbert::sigma_plus() * hilbert::sigma_minus(),
                                      Subsystem::Spin, layout));
    const Trajectory traj =
        liouville::evolve(rho0, h, terms, spec.integrator, obs, stationarity_for(spec, "n_b"));

    Table t;
    t.header = resolved_header(spec);
    t.columns = {"t", "n_b", "n_a", "n_s", "trace_error"};
    const auto ib = static_cast<std::size_t>(traj.name_index("n_b"));
    const auto ia = static_cast<std::size_t>(traj.name_index("n_a"));
    const auto is = static_cast<std::size_t>(traj.name_index("n_s"));
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        t.rows.push_back({traj.times[i], traj.records[i][ib], traj.records[i][ia],
                          traj.records[i][is], traj.trace_dev[i]});
    append_trajectory_footer(t, traj);
    return t;
}

Table evolve_reduced_table(const RunSpec& spec) {
    const SpaceLayout layout = SpaceLayout::spin_b(spec.truncation.dim_b);
    const ReducedParams r = ReducedParams::from_system(spec.params);
    const DensityMatrix rho0 =
        product_state(layout, spec.initial.spin_excited, 0.0,
                      spec.initial.n_b.value_or(spec.params.nbar_b));
    const Trajectory traj =
        reduced::evolve_reduced(rho0, r, spec.integrator, stationarity_for(spec, "n_b"));

    Table t;
    t.header = resolved_header(spec);
    t.columns = {"t", "n_b", "n_s", "trace_error"};
    const auto ib = static_cast<std::size_t>(traj.name_index("n_b"));
    const auto is = static_cast<std::size_t>(traj.name_index("n_s"));
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        t.rows.push_back({traj.times[i], traj.records[i][ib], traj.records[i][is], traj.trace_dev[i]});
    append_trajectory_footer(t, traj);
    return t;
}

Table evolve_meanfield_table(const RunSpec& spec) {
    const ReducedParams r = ReducedParams::from_system(spec.params);
    meanfield::MeanFieldState initial;
    initial.n_s = spec.initial.spin_excited ? 1.0 : 0.0;
    initial.n_b = spec.initial.n_b.value_or(spec.params.nbar_b);
    const auto traj =
        meanfield::evolve_mean_field(initial, r, spec.integrator, stationarity_for(spec, "n_b"));

    Table t;
    t.header = resolved_header(spec);
    t.columns = {"t", "n_b", "n_s", "trace_error"};
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        t.rows.push_back({traj.times[i], traj.states[i].n_b, traj.states[i].n_s, 0.0});
    if (traj.stationary_at)
        t.footer.push_back("stationary_at = " + format_real(*traj.stationary_at));
    else
        t.footer.push_back("stationary_at = none (not stationary within t_final)");
    t.footer.push_back("final n_b = " + format_real(traj.final_state().n_b));
    t.footer.push_back("final n_s = " + format_real(traj.final_state().n_s));
    t.footer.push_back("analytic stationary n_b = " + format_real(stationary_nb(r)));
    return t;
}

}  // namespace

Table cmd_evolve(const RunSpec& spec) {
    if (spec.mode == "evolve-full") return evolve_full_table(spec);
    if (spec.mode == "evolve-reduced") return evolve_reduced_table(spec);
    if (spec.mode == "evolve-meanfield") return evolve_meanfield_table(spec);
    throw std::invalid_argument("cmd_evolve: wrong mode '" + spec.mode + "'");
}

// ----- compare -----

Table cmd_compare(const RunSpec& spec) {
    if (spec.mode != "compare") throw std::invalid_argument("cmd_compare: wrong mode '" + spec.mode + "'");
    if (spec.sweep.size() != 2)
        throw ConfigError("compare: sweep must list the two axes nbar_a and Gamma");
    for (const auto& axis : spec.sweep)
        if (axis.name != "nbar_a" && axis.name != "Gamma")
            throw ConfigError("compare: unsupported sweep axis '" + axis.name + "'");
    if (spec.sweep[0].name == spec.sweep[1].name)
        throw ConfigError("compare: sweep axes must be distinct");

    struct Point {
        double nbar_a, Gamma;
    };
    std::vector<Point> points;  // outer = first listed axis, inner = second
    for (double outer : spec.sweep[0].values)
        for (double inner : spec.sweep[1].values) {
            const bool outer_is_nbar = spec.sweep[0].name == "nbar_a";
            points.push_back({outer_is_nbar ? outer : inner, outer_is_nbar ? inner : outer});
        }

    std::vector<std::array<double, 6>> results(points.size());
    std::vector<std::string> notes(points.size());
    parallel_for(points.size(), spec.threads, [&](std::size_t i) {
        SystemParams p = spec.params;
        p.nbar_a = points[i].nbar_a;
        p.Gamma = points[i].Gamma;
        Index da = spec.truncation.dim_a, db = spec.truncation.dim_b;
        if (!spec.explicit_truncation && spec.profile == "paper") {
            da = config::default_dim_a(p.nbar_a);
            db = 15;
        }
        const auto full = full_model_nb(p, da, db, spec.initial, spec.integrator,
                                        stationarity_for(spec, "n_b"));
        const double analytic = stationary_nb(ReducedParams::from_system(p));
        const double diff = std::abs(full.nb_final - analytic);
        const double rel = diff / std::max(std::abs(analytic), 1e-300);
        results[i] = {p.nbar_a, p.Gamma, full.nb_final, analytic, diff, rel};
        if (!full.stationary)
            notes[i] = "point nbar_a = " + format_real(p.nbar_a) + ", Gamma = " +
                       format_real(p.Gamma) + ": not stationary within t_final; using final value";
    });

    Table t;
    t.header = resolved_header(spec);
    t.columns = {"nbar_a", "Gamma", "nb_numeric", "nb_analytic", "abs_diff", "rel_diff"};
    for (const auto& r : results) t.rows.push_back({r[0], r[1], r[2], r[3], r[4], r[5]});
    for (const auto& n : notes)
        if (!n.empty()) t.footer.push_back("warning: " + n);
    return t;
}

void enforce_compare_check(const RunSpec& spec, const Table& t) {
    if (!spec.check) return;
    const double gate = 10.0 * std::max(spec.params.gamma_a, spec.params.gamma_b);
    std::string violations;
    for (const auto& row : t.rows) {
        if (row[1] < gate) continue;  // analytic model not expected to hold
        if (row[4] > spec.check_abs_tol) {
            violations += "\n  nbar_a = " + format_real(row[0]) + ", Gamma = " + format_real(row[1]) +
                          ": |numeric - analytic| = " + format_real(row[4]) + " > " +
                          format_real(spec.check_abs_tol);
        }
    }
    if (!violations.empty())
        throw CheckError("compare check failed (tolerance " + format_real(spec.check_abs_tol) +
                         ", gated at Gamma >= " + format_real(gate) + "):" + violations);
}

// ----- derive-params -----

Table cmd_derive_params(const RunSpec& spec) {
    if (spec.mode != "derive-params")
        throw std::invalid_argument("cmd_derive_params: wrong mode '" + spec.mode + "'");
    if (!spec.physical) throw ConfigError("derive-params: missing 'physical' block");
    const model::PhysicalParams& ph = *spec.physical;
    const SystemParams sys = model::derive_system_params(ph, spec.params.Gamma, spec.params.nbar_a);

    Table t;
    t.header = resolved_header(spec);
    t.header.push_back("mass_a = " + format_real(ph.mass_a));
    t.header.push_back("mass_b = " + format_real(ph.mass_b));
    t.header.push_back("omega_a = " + format_real(ph.omega_a));
    t.header.push_back("omega_b = " + format_real(ph.omega_b));
    t.header.push_back("gradient2 = " + format_real(ph.gradient2));
    t.header.push_back("temperature = " + format_real(ph.temperature));
    t.header.push_back("quality_factor = " + format_real(ph.quality_factor));
    t.columns = {"si_angular", "over_2pi", "renormalized"};
    t.labels.clear();

    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double unit = sys.gamma_b;  // renormalized scale: gamma_b = 1
    const auto add = [&](const std::string& name, double v, bool dimensionless) {
        t.labels.push_back(name);
        if (dimensionless)
            t.rows.push_back({v, v, v});
        else
            t.rows.push_back({v, v / kTwoPi, v / unit});
    };
    add("omega_z", sys.omega_z, false);
    add("delta", sys.delta, false);
    add("g_a", sys.g_a, false);
    add("g_b", sys.g_b, false);
    add("g_ab", sys.g_ab, false);
    add("gamma_a", sys.gamma_a, false);
    add("gamma_b", sys.gamma_b, false);
    add("Gamma", sys.Gamma, false);
    add("nbar_a", sys.nbar_a, true);
    add("nbar_b", sys.nbar_b, true);

    t.footer.push_back("occupations are dimensionless; the three columns coincide");
    t.footer.push_back("x_zpf_a = " + format_real(model::zero_point_fluctuation(ph.mass_a, ph.omega_a)));
    t.footer.push_back("x_zpf_b = " + format_real(model::zero_point_fluctuation(ph.mass_b, ph.omega_b)));
    for (const auto& w : model::validate_regime(sys)) t.footer.push_back("warning: " + w);
    return t;
}

// ----- dispatch -----

Table run_command(const RunSpec& spec) {
    Table t;
    if (spec.mode == "analytic-sweep")
        t = cmd_analytic_sweep(spec);
    else if (spec.mode == "gamma-sweep")
        t = cmd_gamma_sweep(spec);
    else if (spec.mode.rfind("evolve", 0) == 0)
        t = cmd_evolve(spec);
    else if (spec.mode == "compare")
        t = cmd_compare(spec);
    else if (spec.mode == "derive-params")
        t = cmd_derive_params(spec);
    else
        throw ConfigError("run_command: unknown mode '" + spec.mode + "'");

    if (!spec.output.empty()) t.write_csv(spec.output);
    if (spec.mode == "compare") enforce_compare_check(spec, t);
    return t;
}

}  // namespace nvcool::commands

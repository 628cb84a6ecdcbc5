#include "nvcool/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>

#include <nlohmann/json.hpp>

#include "nvcool/errors.hpp"

namespace nvcool::config {

namespace {

using json = nlohmann::ordered_json;

constexpr double kTwoPi = 6.283185307179586476925286766559;

const std::set<std::string> kModes = {"analytic-sweep",  "gamma-sweep", "evolve-full",
                                      "evolve-reduced",  "evolve-meanfield",
                                      "compare",         "derive-params"};

struct FieldDef {
    const char* name;
    double model::SystemParams::*ptr;
    bool scaled;  // frequency/rate: suffixed and 2-pi-scaled in over_2pi style
};

constexpr FieldDef kFields[] = {
    {"omega_z", &model::SystemParams::omega_z, true},
    {"delta", &model::SystemParams::delta, true},
    {"g_a", &model::SystemParams::g_a, true},
    {"g_b", &model::SystemParams::g_b, true},
    {"g_ab", &model::SystemParams::g_ab, true},
    {"gamma_a", &model::SystemParams::gamma_a, true},
    {"gamma_b", &model::SystemParams::gamma_b, true},
    {"Gamma", &model::SystemParams::Gamma, true},
    {"nbar_a", &model::SystemParams::nbar_a, false},
    {"nbar_b", &model::SystemParams::nbar_b, false},
};

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// One JSON object with consumed-key accounting: anything left over at the
// end is an error naming the key.
class ObjReader {
  public:
    ObjReader(const json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
        if (!j_.is_object()) throw ConfigError(ctx_ + ": expected a JSON object");
    }

    const json* get(const std::string& key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        consumed_.insert(key);
        return &*it;
    }

    double number(const std::string& key) {
        const json* v = get(key);
        if (!v) throw ConfigError(ctx_ + ": missing required key '" + key + "'");
        return as_number(key, *v);
    }

    std::optional<double> opt_number(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        return as_number(key, *v);
    }

    std::optional<std::string> opt_string(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) throw ConfigError(ctx_ + ": key '" + key + "' must be a string");
        return v->get<std::string>();
    }

    std::optional<bool> opt_bool(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) throw ConfigError(ctx_ + ": key '" + key + "' must be a boolean");
        return v->get<bool>();
    }

    std::optional<long> opt_integer(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) throw ConfigError(ctx_ + ": key '" + key + "' must be an integer");
        return v->get<long>();
    }

    void check_unknown(const std::function<std::string(const std::string&)>& hint = {}) const {
        for (const auto& [k, v] : j_.items()) {
            if (consumed_.count(k)) continue;
            std::string msg = ctx_ + ": unknown key '" + k + "'";
            if (hint) {
                const std::string h = hint(k);
                if (!h.empty()) msg += " (" + h + ")";
            }
            throw ConfigError(msg);
        }
    }

    const json& raw() const { return j_; }
    const std::string& ctx() const { return ctx_; }

  private:
    double as_number(const std::string& key, const json& v) const {
        if (!v.is_number()) throw ConfigError(ctx_ + ": key '" + key + "' must be a number");
        return v.get<double>();
    }

    const json& j_;
    std::string ctx_;
    std::set<std::string> consumed_;
};

std::vector<double> number_array(const ObjReader& parent, const std::string& key, const json& v) {
    if (!v.is_array() || v.empty())
        throw ConfigError(parent.ctx() + ": key '" + key + "' must be a non-empty array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number())
            throw ConfigError(parent.ctx() + ": key '" + key + "' must contain only numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace

Index default_dim_a(double nbar_a) {
    for (Index k = 1; k <= 4; ++k)
        if (std::abs(nbar_a - double(k)) < 1e-9) {
            constexpr Index table[] = {15, 27, 40, 60};
            return table[k - 1];
        }
    const double d = std::ceil(4.0 * nbar_a + 5.0);
    return std::max<Index>(5, static_cast<Index>(d));
}

RunSpec load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("load_config: cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("load_config: parse failure in '" + path + "': " + e.what());
    }

    ObjReader top(doc, "config");
    RunSpec spec;

    const auto mode = top.opt_string("mode");
    if (!mode) throw ConfigError("config: missing required key 'mode'");
    if (!kModes.count(*mode)) throw ConfigError("config: unknown mode '" + *mode + "'");
    spec.mode = *mode;

    // --- parameter style: renormalized XOR *_over_2pi ---
    spec.renormalized = top.opt_bool("renormalized").value_or(false);
    bool any_suffixed = false;
    for (const auto& [k, v] : doc.items())
        if (ends_with(k, "_over_2pi")) any_suffixed = true;
    if (doc.contains("sweep") && doc["sweep"].is_object())
        for (const auto& [k, v] : doc["sweep"].items())
            if (ends_with(k, "_over_2pi")) any_suffixed = true;
    if (spec.renormalized && any_suffixed)
        throw ConfigError(
            "config: exactly one parameter style per file (remove the *_over_2pi keys or the "
            "renormalized flag)");
    if (spec.mode == "derive-params" && spec.renormalized)
        throw ConfigError("config: derive-params takes physical units, not renormalized values");
    const double factor = spec.renormalized ? 1.0 : kTwoPi;

    // --- system parameters ---
    std::set<std::string> provided;
    for (const auto& f_def : kFields) {
        const std::string key =
            (f_def.scaled && !spec.renormalized) ? std::string(f_def.name) + "_over_2pi" : f_def.name;
        if (const auto v = top.opt_number(key)) {
            spec.params.*(f_def.ptr) = f_def.scaled ? *v * factor : *v;
            provided.insert(f_def.name);
        }
    }

    // --- sweep axes (input order preserved) ---
    if (const json* sv = top.get("sweep")) {
        ObjReader sweep(*sv, "sweep");
        for (const auto& [key, val] : sv->items()) {
            std::string base = key;
            double axis_factor = 1.0;
            if (!spec.renormalized && ends_with(key, "_over_2pi")) {
                base = key.substr(0, key.size() - std::string("_over_2pi").size());
                axis_factor = kTwoPi;
            }
            const FieldDef* def = nullptr;
            for (const auto& f_def : kFields)
                if (base == f_def.name) def = &f_def;
            if (!def) throw ConfigError("sweep: unknown parameter '" + key + "'");
            if (def->scaled && !spec.renormalized && axis_factor == 1.0)
                throw ConfigError("sweep: key '" + key + "' needs the _over_2pi suffix in this style");
            if (!def->scaled && axis_factor != 1.0)
                throw ConfigError("sweep: occupation '" + base + "' takes no _over_2pi suffix");
            SweepAxis axis;
            axis.name = base;
            axis.values = number_array(sweep, key, val);
            for (double& x : axis.values) x *= axis_factor;
            if (!provided.count(base)) {
                spec.params.*(def->ptr) = axis.values.front();
                provided.insert(base);
            }
            spec.sweep.push_back(std::move(axis));
            sweep.get(key);  // mark consumed
        }
        sweep.check_unknown();
    }

    // --- required fields ---
    if (spec.mode != "derive-params") {
        for (const char* name :
             {"omega_z", "g_ab", "gamma_a", "gamma_b", "Gamma", "nbar_a", "nbar_b"}) {
            if (provided.count(name)) continue;
            const bool scaled = std::string(name).rfind("nbar", 0) != 0;
            const std::string styled =
                (scaled && !spec.renormalized) ? std::string(name) + "_over_2pi" : name;
            throw ConfigError("config: missing required key '" + styled + "'");
        }
        if (!provided.count("delta")) spec.params.delta = spec.params.omega_z;
    } else if (!spec.sweep.empty()) {
        throw ConfigError("config: derive-params does not take a sweep");
    }

    // --- physical parameters (derive-params) ---
    if (const json* pv = top.get("physical")) {
        ObjReader phys(*pv, "physical");
        model::PhysicalParams p;
        p.mass_a = phys.number("mass_a");
        p.mass_b = phys.number("mass_b");
        p.omega_a = phys.number("omega_a_over_2pi") * kTwoPi;
        p.omega_b = phys.number("omega_b_over_2pi") * kTwoPi;
        p.gradient2 = phys.number("gradient2");
        p.temperature = phys.number("temperature");
        p.quality_factor = phys.number("quality_factor");
        phys.check_unknown();
        spec.physical = p;
    }
    if (spec.mode == "derive-params") {
        if (!spec.physical) throw ConfigError("config: derive-params requires a 'physical' block");
        for (const char* name : {"Gamma", "nbar_a"})
            if (!provided.count(name))
                throw ConfigError(std::string("config: missing required key '") +
                                  (std::string(name) == "Gamma" ? "Gamma_over_2pi" : name) + "'");
    }

    // --- truncation ---
    if (const json* tv = top.get("truncation")) {
        ObjReader tr(*tv, "truncation");
        if (const auto d = tr.opt_integer("dim_a")) {
            if (*d < 2) throw ConfigError("truncation: dim_a must be >= 2");
            spec.truncation.dim_a = static_cast<Index>(*d);
        }
        if (const auto d = tr.opt_integer("dim_b")) {
            if (*d < 2) throw ConfigError("truncation: dim_b must be >= 2");
            spec.truncation.dim_b = static_cast<Index>(*d);
        }
        tr.check_unknown();
        spec.explicit_truncation = true;
    }

    // --- integrator ---
    if (const json* iv = top.get("integrator")) {
        ObjReader integ(*iv, "integrator");
        if (const auto v = integ.opt_number("dt")) spec.integrator.dt = *v;
        if (const auto v = integ.opt_number("t_final")) spec.integrator.t_final = *v;
        if (const auto v = integ.opt_integer("record_stride"))
            spec.integrator.record_stride = static_cast<int>(*v);
        integ.check_unknown();
        try {
            spec.integrator.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("integrator: ") + e.what());
        }
    }

    // --- stationarity ---
    if (const json* sv = top.get("stationarity")) {
        ObjReader st(*sv, "stationarity");
        if (const auto v = st.opt_string("observable")) spec.stationarity.observable = *v;
        if (const auto v = st.opt_number("window")) spec.stationarity.window = *v;
        if (const auto v = st.opt_number("tol")) spec.stationarity.tol = *v;
        st.check_unknown();
    }

    // --- initial state ---
    if (const json* iv = top.get("initial")) {
        ObjReader init(*iv, "initial");
        if (const auto v = init.opt_string("spin")) {
            if (*v == "excited")
                spec.initial.spin_excited = true;
            else if (*v != "ground")
                throw ConfigError("initial: spin must be 'ground' or 'excited'");
        }
        spec.initial.n_a = init.opt_number("n_a");
        spec.initial.n_b = init.opt_number("n_b");
        init.check_unknown();
    }

    // --- output / check ---
    if (const auto v = top.opt_string("output")) spec.output = *v;
    if (const json* cv = top.get("check")) {
        if (cv->is_boolean()) {
            spec.check = cv->get<bool>();
        } else {
            ObjReader ch(*cv, "check");
            spec.check = true;
            if (const auto v = ch.opt_number("abs_tol")) {
                if (!(*v > 0)) throw ConfigError("check: abs_tol must be > 0");
                spec.check_abs_tol = *v;
            }
            ch.check_unknown();
        }
    }

    top.check_unknown([&](const std::string& k) -> std::string {
        for (const auto& f_def : kFields) {
            if (!spec.renormalized && f_def.scaled && k == f_def.name)
                return "did you mean '" + k + "_over_2pi'?";
            if (spec.renormalized && k == std::string(f_def.name) + "_over_2pi")
                return "renormalized style uses plain '" + std::string(f_def.name) + "'";
        }
        return "";
    });
    return spec;
}

void resolve(RunSpec& spec) {
    // profile-dependent truncation defaults
    if (spec.profile == "ci") {
        if (spec.truncation.dim_a == 0) spec.truncation.dim_a = 25;
        if (spec.truncation.dim_b == 0) spec.truncation.dim_b = 10;
    } else if (spec.profile == "paper") {
        if (spec.truncation.dim_a == 0) spec.truncation.dim_a = default_dim_a(spec.params.nbar_a);
        if (spec.truncation.dim_b == 0) spec.truncation.dim_b = 15;
    } else if (!spec.profile.empty()) {
        throw ConfigError("resolve: unknown profile '" + spec.profile + "' (use ci or paper)");
    }
    if (spec.threads < 1) throw ConfigError("resolve: threads must be >= 1");

    const bool needs_a = spec.mode == "evolve-full";
    const bool needs_b = needs_a || spec.mode == "evolve-reduced";
    if (needs_a && spec.truncation.dim_a == 0)
        throw ConfigError("resolve: " + spec.mode + " needs truncation.dim_a (or --profile ci|paper)");
    if (needs_b && spec.truncation.dim_b == 0)
        throw ConfigError("resolve: " + spec.mode + " needs truncation.dim_b (or --profile ci|paper)");
    if (spec.mode == "compare" && !spec.explicit_truncation && spec.profile.empty())
        throw ConfigError("resolve: compare needs truncation dims or --profile ci|paper");

    if (spec.mode == "derive-params") return;  // params are outputs, not inputs

    spec.params.validate();

    // truncation adequacy (evolve modes and compare)
    const auto check_dim = [&spec](const char* name, Index dim, double nbar) {
        if (dim == 0) return;
        const double needed = 4.0 * nbar + 5.0;
        if (double(dim) < needed) {
            std::string w = std::string("truncation: ") + name + " = " + std::to_string(dim) +
                            " is below 4*nbar + 5 = " + std::to_string(needed) +
                            "; truncation error may dominate";
            spec.warnings.push_back(std::move(w));
        }
    };
    if (spec.mode == "evolve-full" || spec.mode == "compare")
        check_dim("dim_a", spec.truncation.dim_a, spec.params.nbar_a);
    if (needs_b || spec.mode == "compare") check_dim("dim_b", spec.truncation.dim_b, spec.params.nbar_b);

    for (auto& w : model::validate_regime(spec.params)) spec.warnings.push_back(std::move(w));
}

}  // namespace nvcool::config

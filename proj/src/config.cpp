#include "nmqsd/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "nmqsd/errors.hpp"

namespace nmqsd {

using json = nlohmann::json;

Solver parse_solver(const std::string& name) {
    if (name == "qsd") return Solver::qsd;
    if (name == "lindblad") return Solver::lindblad;
    if (name == "finite-mode" || name == "finite_mode") return Solver::finite_mode;
    throw ConfigError("unknown solver '" + name + "' (expected qsd, lindblad or finite-mode)");
}

std::string solver_name(Solver s) {
    switch (s) {
        case Solver::qsd: return "qsd";
        case Solver::lindblad: return "lindblad";
        case Solver::finite_mode: return "finite-mode";
    }
    return "?";
}

void ExperimentPlan::validate() const {
    if (experiments.empty()) throw ConfigError("experiment plan is empty");
    std::set<std::string> seen;
    for (const auto& e : experiments) {
        if (e.label.empty()) throw ConfigError("every experiment needs a label");
        if (!seen.insert(e.label).second) throw ConfigError("duplicate experiment label '" + e.label + "'");
        e.config.validate();
    }
}

InitialState parse_initial_state_label(const std::string& label) {
    try {
        return PureState::from_label(label);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("initial_state: ") + e.what());
    }
}

namespace {

const std::set<std::string> kRunKeys = {
    "omega", "omega_a", "omega_b", "kappa", "lambda", "Gamma", "gamma", "initial_state", "T", "dt",
    "output_stride", "n_traj", "seed", "mode", "refine_levels", "failure_budget", "deterministic_reduction",
    "threads"};
const std::set<std::string> kExperimentKeys = {"label", "solver", "observables", "modes_per_bath",
                                               "cutoff_multiple"};
const std::vector<std::string> kRequired = {"lambda", "gamma", "T"};

Complex parse_complex(const json& v, const std::string& where) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw ConfigError(where + ": expected a number or [re, im]");
}

InitialState parse_initial_state(const json& v) {
    if (v.is_null() || (v.is_string() && v.get<std::string>().empty()) || (v.is_object() && v.empty()))
        throw ConfigError("missing initial state: initial_state is empty");
    if (v.is_string()) return parse_initial_state_label(v.get<std::string>());
    if (!v.is_object() || v.size() != 1)
        throw ConfigError("initial_state must be a label or an object with one of werner, amplitudes, density_matrix");
    const std::string kind = v.begin().key();
    const json& body = v.begin().value();
    try {
        if (kind == "werner") {
            if (!body.is_number()) throw ConfigError("initial_state.werner must be a number");
            const double q = body.get<double>();
            if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("initial_state.werner: Q must lie in [0, 1]");
            return werner_state(q);
        }
        if (kind == "amplitudes") {
            if (!body.is_array() || body.size() != 4) throw ConfigError("initial_state.amplitudes needs 4 entries");
            Ket psi;
            for (int i = 0; i < 4; ++i) psi(i) = parse_complex(body[i], "initial_state.amplitudes");
            if (psi.norm() == 0.0) throw ConfigError("initial_state.amplitudes: zero vector");
            return PureState(psi);
        }
        if (kind == "density_matrix") {
            if (!body.is_array() || body.size() != 4) throw ConfigError("initial_state.density_matrix needs 4 rows");
            Operator rho;
            for (int r = 0; r < 4; ++r) {
                if (!body[r].is_array() || body[r].size() != 4)
                    throw ConfigError("initial_state.density_matrix rows need 4 entries");
                for (int c = 0; c < 4; ++c) rho(r, c) = parse_complex(body[r][c], "initial_state.density_matrix");
            }
            Eigen::SelfAdjointEigenSolver<Operator> eig(rho);
            if (eig.eigenvalues().minCoeff() < -1e-10)
                throw ConfigError("initial_state.density_matrix is not positive semidefinite");
            return DensityMatrix(rho, 1e-10);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("initial_state: ") + e.what());
    }
    throw ConfigError("initial_state: unknown form '" + kind + "'");
}

double number(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError(key + " must be a number");
    return v.get<double>();
}

std::uint64_t unsigned_integer(const json& v, const std::string& key) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        throw ConfigError(key + " must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

void apply_key(SimulationConfig& c, const std::string& key, const json& v) {
    if (key == "omega") c.omega_a = c.omega_b = number(v, key);
    else if (key == "omega_a") c.omega_a = number(v, key);
    else if (key == "omega_b") c.omega_b = number(v, key);
    else if (key == "kappa") c.kappa = number(v, key);
    else if (key == "lambda") c.lambda = number(v, key);
    else if (key == "Gamma") c.coupling = number(v, key);
    else if (key == "gamma") c.bandwidth = number(v, key);
    else if (key == "initial_state") c.initial = parse_initial_state(v);
    else if (key == "T") c.t_final = number(v, key);
    else if (key == "dt") c.dt = number(v, key);
    else if (key == "output_stride") c.output_stride = number(v, key);
    else if (key == "n_traj") c.n_traj = unsigned_integer(v, key);
    else if (key == "seed") c.seed = unsigned_integer(v, key);
    else if (key == "refine_levels") c.refine_levels = static_cast<int>(unsigned_integer(v, key));
    else if (key == "failure_budget") c.failure_budget = unsigned_integer(v, key);
    else if (key == "threads") c.threads = static_cast<unsigned>(unsigned_integer(v, key));
    else if (key == "deterministic_reduction") {
        if (!v.is_boolean()) throw ConfigError("deterministic_reduction must be true or false");
        c.deterministic_reduction = v.get<bool>();
    } else if (key == "mode") {
        const std::string m = v.is_string() ? v.get<std::string>() : "";
        if (m == "linear") c.mode = QsdMode::linear;
        else if (m == "nonlinear") c.mode = QsdMode::nonlinear;
        else throw ConfigError("mode must be \"linear\" or \"nonlinear\"");
    }
}

// Builds one config from the merged key set, checking required keys first so
// that an empty file reports all of them at once.
SimulationConfig build(const json& merged) {
    std::vector<std::string> missing;
    for (const auto& k : kRequired)
        if (!merged.contains(k)) missing.push_back(k);
    if (!missing.empty()) {
        std::string list;
        for (const auto& k : missing) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError("missing required keys: " + list);
    }
    SimulationConfig c;
    for (const auto& [key, value] : merged.items()) apply_key(c, key, value);
    if (!(std::abs(c.lambda) <= 1.0))
        throw ConfigError("lambda = " + std::to_string(c.lambda) +
                          ": |lambda| > 1 is rejected, the dynamics may become unphysical and lose its positivity");
    c.validate();
    return c;
}

void check_keys(const json& obj, bool experiment_entry) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (kRunKeys.count(key)) continue;
        if (experiment_entry && kExperimentKeys.count(key)) continue;
        if (!experiment_entry && key == "experiments") continue;
        throw ConfigError("unknown key '" + key + "'");
    }
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
    json doc;
    bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
    if (blank) {
        doc = json::object();
    } else {
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    check_keys(doc, false);
    if (!doc.contains("experiments")) return build(doc);

    const json& list = doc["experiments"];
    if (!list.is_array() || list.empty()) throw ConfigError("experiments must be a nonempty array");
    json defaults = doc;
    defaults.erase("experiments");
    ExperimentPlan plan;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const json& entry = list[i];
        if (!entry.is_object()) throw ConfigError("experiments[" + std::to_string(i) + "] must be an object");
        check_keys(entry, true);
        json merged = defaults;
        Experiment e;
        for (const auto& [key, value] : entry.items()) {
            if (key == "label") {
                if (!value.is_string()) throw ConfigError("label must be a string");
                e.label = value.get<std::string>();
            } else if (key == "solver") {
                if (!value.is_string()) throw ConfigError("solver must be a string");
                e.solver = parse_solver(value.get<std::string>());
            } else if (key == "observables") {
                if (!value.is_array()) throw ConfigError("observables must be an array of names");
                e.observables.clear();
                for (const auto& o : value) {
                    const std::string name = o.is_string() ? o.get<std::string>() : "";
                    if (name != "C_xx" && name != "concurrence" && name != "ground_population")
                        throw ConfigError("unknown observable '" + name + "'");
                    e.observables.push_back(name);
                }
            } else if (key == "modes_per_bath") {
                e.finite_mode.modes_per_bath = static_cast<int>(unsigned_integer(value, key));
            } else if (key == "cutoff_multiple") {
                e.finite_mode.cutoff_multiple = number(value, key);
            } else {
                merged[key] = value;
            }
        }
        if (e.label.empty()) e.label = "exp" + std::to_string(i);
        try {
            e.config = build(merged);
        } catch (const ConfigError& err) {
            throw ConfigError("experiment '" + e.label + "': " + err.what());
        }
        plan.experiments.push_back(std::move(e));
    }
    plan.validate();
    return plan;
}

ParsedConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path);
    std::ostringstream s;
    s << f.rdbuf();
    return parse_config_text(s.str());
}

}  // namespace nmqsd

#pragma once

#include <string>
#include <variant>
#include <vector>

#include "nmqsd/finite_mode.hpp"
#include "nmqsd/simulation.hpp"

namespace nmqsd {

enum class Solver { qsd, lindblad, finite_mode };

Solver parse_solver(const std::string& name);
std::string solver_name(Solver s);

struct Experiment {
    std::string label;
    SimulationConfig config;
    Solver solver = Solver::qsd;
    std::vector<std::string> observables{"C_xx", "concurrence", "ground_population"};
    FiniteModeOptions finite_mode;
};

struct ExperimentPlan {
    std::vector<Experiment> experiments;

    /// Labels unique and every config valid.
    void validate() const;
};

using ParsedConfig = std::variant<SimulationConfig, ExperimentPlan>;

/// JSON object with flat keys. A top-level "experiments" array turns the file
/// into a plan; keys outside the array are defaults for every entry.
///
///   omega, omega_a, omega_b, kappa, lambda, Gamma, gamma, initial_state, T,
///   dt, output_stride, n_traj, seed, mode, refine_levels, failure_budget,
///   deterministic_reduction, threads
///   per experiment also: label, solver, observables, modes_per_bath,
///   cutoff_multiple
///
/// lambda, gamma and T are required. initial_state is a label ("10",
/// "11+00", ...), {"werner": Q}, {"amplitudes": [[re, im] x 4]} or
/// {"density_matrix": 4x4 of [re, im]}; it defaults to |10>. Throws
/// ConfigError on unknown keys, missing keys and invalid values.
ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config(const std::string& path);

InitialState parse_initial_state_label(const std::string& label);

}  // namespace nmqsd

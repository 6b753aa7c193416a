// nmqsd: command-line front end.
//
//   nmqsd run --config cfg.json --out results/
//   nmqsd figure fig2 --out figs/ --n-traj 1000
//   nmqsd compare a_rho.csv b_rho.csv --out distance.csv
//   nmqsd converge --config cfg.json --out conv/
//   nmqsd noise-check --config cfg.json --paths 100000
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "nmqsd/config.hpp"
#include "nmqsd/errors.hpp"
#include "nmqsd/experiments.hpp"
#include "nmqsd/io.hpp"
#include "nmqsd/trajectory.hpp"

using namespace nmqsd;

namespace {

struct Common {
    std::string config_path;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<bool> deterministic;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("--config", c.config_path, "JSON configuration file");
    if (needs_config) opt->required();
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_flag("--deterministic-reduction,!--no-deterministic-reduction", c.deterministic,
                  "fixed summation tree for bitwise reproducible ensembles");
}

void apply_overrides(SimulationConfig& cfg, const Common& c) {
    if (c.seed) cfg.seed = *c.seed;
    if (c.deterministic) cfg.deterministic_reduction = *c.deterministic;
}

SimulationConfig single_config(const Common& c) {
    ParsedConfig parsed = parse_config(c.config_path);
    if (!std::holds_alternative<SimulationConfig>(parsed))
        throw ConfigError("this command takes a single configuration, not an experiment list");
    SimulationConfig cfg = std::get<SimulationConfig>(parsed);
    apply_overrides(cfg, c);
    return cfg;
}

void write_to(const std::string& dir, const std::string& name, const std::string& body) {
    std::filesystem::create_directories(dir);
    write_file((std::filesystem::path(dir) / name).string(), body);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-Markovian QSD simulator for two qubits in correlated baths"};
    app.require_subcommand(1);

    Common run_opts;
    std::string solver = "qsd";
    bool dump_coefficients = false;
    std::optional<std::size_t> dump_noise;
    auto* run = app.add_subcommand("run", "run one configuration or an experiment list");
    add_common(run, run_opts, true);
    run->add_option("--solver", solver, "qsd, lindblad or finite-mode (single configurations)");
    run->add_flag("--dump-coefficients", dump_coefficients, "also write the F coefficients");
    run->add_option("--dump-noise", dump_noise, "also write the noise path of this trajectory");

    Common fig_opts;
    std::string figure_id;
    FigureOptions figure;
    std::optional<double> figure_t;
    auto* fig = app.add_subcommand("figure", "reproduce fig1, fig2 or fig3");
    fig->add_option("id", figure_id, "fig1 | fig2 | fig3")->required();
    add_common(fig, fig_opts, false);
    fig->add_option("--n-traj", figure.n_traj, "trajectories per curve");
    fig->add_option("--dt", figure.dt, "time step");
    fig->add_option("--T", figure_t, "horizon for every curve");
    fig->add_option("--q-grid", figure.q_grid, "Werner Q values for fig3");
    fig->add_option("--threads", figure.threads, "worker threads (0: all cores)");

    std::string compare_a, compare_b, compare_out;
    auto* cmp = app.add_subcommand("compare", "trace distance between two density series");
    cmp->add_option("first", compare_a)->required();
    cmp->add_option("second", compare_b)->required();
    cmp->add_option("--out", compare_out, "output CSV (default: stdout)");

    Common conv_opts;
    auto* conv = app.add_subcommand("converge", "step-size and ensemble-size convergence report");
    add_common(conv, conv_opts, true);

    Common noise_opts;
    std::size_t noise_paths = 100000;
    auto* noise = app.add_subcommand("noise-check", "empirical statistics of the generated noise");
    add_common(noise, noise_opts, true);
    noise->add_option("--paths", noise_paths, "number of sampled paths");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run) {
            ParsedConfig parsed = parse_config(run_opts.config_path);
            if (auto* cfg = std::get_if<SimulationConfig>(&parsed)) {
                apply_overrides(*cfg, run_opts);
                Experiment e;
                e.label = "run";
                e.config = *cfg;
                e.solver = parse_solver(solver);
                write_curve(run_opts.out, run_experiment(e));
                if (dump_coefficients) {
                    const BathModel model = build_bath_model(*cfg);
                    const CoefficientSystem system(model.system.hamiltonian, model.channels);
                    std::ostringstream s;
                    write_coefficients(s, evolve_coefficients(system, cfg->grid()));
                    write_to(run_opts.out, "coefficients.csv", s.str());
                }
                if (dump_noise) {
                    std::ostringstream s;
                    write_noise_path(s, sample_noise_path(build_bath_model(*cfg).kernels(), cfg->grid(), cfg->seed,
                                                          *dump_noise, cfg->refine_levels));
                    write_to(run_opts.out, "noise_" + std::to_string(*dump_noise) + ".csv", s.str());
                }
                std::cout << "wrote " << run_opts.out << "/run.csv\n";
            } else {
                auto& plan = std::get<ExperimentPlan>(parsed);
                for (auto& e : plan.experiments) {
                    apply_overrides(e.config, run_opts);
                    write_curve(run_opts.out, run_experiment(e));
                    std::cout << "wrote " << run_opts.out << '/' << e.label << ".csv\n";
                }
            }
        } else if (*fig) {
            if (fig_opts.seed) figure.seed = *fig_opts.seed;
            if (fig_opts.deterministic) figure.deterministic_reduction = *fig_opts.deterministic;
            figure.t_final = figure_t;
            if (!fig_opts.config_path.empty())
                throw ConfigError("figure takes its parameters from the command line, not --config");
            for (const auto& c : run_figure(figure_id, fig_opts.out, figure))
                std::cout << "wrote " << fig_opts.out << '/' << c.label << ".csv\n";
        } else if (*cmp) {
            std::ifstream fa(compare_a), fb(compare_b);
            if (!fa) throw ConfigError("cannot read " + compare_a);
            if (!fb) throw ConfigError("cannot read " + compare_b);
            const TraceDistanceSeries d = compare_series(read_density_series(fa), read_density_series(fb));
            if (compare_out.empty()) {
                write_trace_distance(std::cout, d);
            } else {
                std::ostringstream s;
                write_trace_distance(s, d);
                write_file(compare_out, s.str());
            }
        } else if (*conv) {
            const ConvergenceReport rep = convergence_report(single_config(conv_opts));
            std::ostringstream s;
            write_convergence_report(s, rep);
            write_to(conv_opts.out, "convergence.csv", s.str());
            std::cout << s.str();
        } else if (*noise) {
            const auto stats = noise_check(single_config(noise_opts), noise_paths);
            std::ostringstream s;
            write_noise_check(s, stats);
            write_to(noise_opts.out, "noise_check.csv", s.str());
            for (const auto& st : stats)
                std::cout << "bath " << "ab"[st.bath] << ": max relative kernel error " << st.max_relative_error
                          << ", max |M[zz]| z-score " << st.max_pseudo_zscore << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

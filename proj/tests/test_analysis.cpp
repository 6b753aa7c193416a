#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nmqsd/config.hpp"
#include "nmqsd/errors.hpp"
#include "nmqsd/experiments.hpp"
#include "nmqsd/io.hpp"
#include "nmqsd/lindblad.hpp"

using namespace nmqsd;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nmqsd_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int cli(const std::string& args) {
    const int status = std::system((std::string(NMQSD_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("parse_config defaults") {
    const auto parsed = parse_config_text(R"({"lambda": 0.6, "gamma": 1, "T": 10})");
    REQUIRE(std::holds_alternative<SimulationConfig>(parsed));
    const auto& c = std::get<SimulationConfig>(parsed);
    CHECK(c.kappa == 1.0);
    CHECK(c.coupling == 1.0);
    CHECK(c.omega_a == 1.0);
    CHECK(c.omega_b == 1.0);
    CHECK(c.n_traj == 1000);
    CHECK(c.lambda == 0.6);
    CHECK(c.t_final == 10.0);
    CHECK(c.dt == 1e-3);
}

TEST_CASE("parse_config errors") {
    CHECK(error_of(R"({"lambda": 1.5, "gamma": 1, "T": 10})").find("positivity") != std::string::npos);
    const std::string empty = error_of("");
    for (const char* key : {"lambda", "gamma", "T"}) CHECK(empty.find(key) != std::string::npos);
    CHECK(error_of(R"({"lambda": 0.1, "gamma": 1, "T": 1, "lamda": 2})").find("unknown key") != std::string::npos);
    CHECK_FALSE(error_of(R"({"lambda": 0.1, "gamma": 1, "T": 1, "dt": 0})").empty());
    CHECK_FALSE(error_of(R"({"lambda": 0.1, "gamma": 1, "T": 1, "dt": -1e-3})").empty());
    CHECK(error_of(R"({"lambda": 0.1, "gamma": 1, "T": 1, "initial_state": null})").find("missing initial state") !=
          std::string::npos);
    CHECK(error_of(R"({"lambda": 0.1, "gamma": 1, "T": 1, "initial_state": ""})").find("missing initial state") !=
          std::string::npos);
    CHECK_FALSE(error_of(R"({"lambda": 0.1, "gamma": 1, "T": 1, "initial_state": "12"})").empty());
    CHECK_FALSE(error_of("[1, 2]").empty());
    CHECK_FALSE(error_of("{not json").empty());
    CHECK_FALSE(error_of(R"({"lambda": 0.1, "gamma": 1, "T": 1, "n_traj": 0})").empty());
}

TEST_CASE("initial state forms") {
    auto parse = [](const std::string& init) {
        return std::get<SimulationConfig>(
            parse_config_text(R"({"lambda": 1, "gamma": 1, "T": 1, "initial_state": )" + init + "}"));
    };
    CHECK(std::holds_alternative<PureState>(parse(R"("11+00")").initial));
    const auto w = parse(R"({"werner": 0.2})");
    REQUIRE(std::holds_alternative<DensityMatrix>(w.initial));
    CHECK(concurrence(std::get<DensityMatrix>(w.initial)) == doctest::Approx(0.7));
    const auto a = parse(R"({"amplitudes": [0, [1, 0], [0, 1], 0]})");
    CHECK(std::abs(std::get<PureState>(a.initial).amplitudes()(k01) - Complex(0, std::sqrt(0.5))) < 1e-15);
    const auto d = parse(R"({"density_matrix": [[0,0,0,0],[0,0.5,0,0],[0,0,0.5,0],[0,0,0,0]]})");
    CHECK(std::get<DensityMatrix>(d.initial)(k10, k10) == Complex(0.5));
}

TEST_CASE("experiment plans") {
    const auto parsed = parse_config_text(R"({
        "gamma": 1, "T": 2, "n_traj": 10,
        "experiments": [
            {"label": "q", "lambda": 0.6},
            {"label": "l", "lambda": 0.2, "solver": "lindblad", "n_traj": 3},
            {"label": "f", "lambda": 0.2, "solver": "finite-mode", "modes_per_bath": 60}
        ]})");
    REQUIRE(std::holds_alternative<ExperimentPlan>(parsed));
    const auto& plan = std::get<ExperimentPlan>(parsed);
    REQUIRE(plan.experiments.size() == 3);
    CHECK(plan.experiments[0].config.n_traj == 10);
    CHECK(plan.experiments[1].config.n_traj == 3);
    CHECK(plan.experiments[1].solver == Solver::lindblad);
    CHECK(plan.experiments[2].finite_mode.modes_per_bath == 60);

    CHECK(error_of(R"({"gamma": 1, "T": 2, "lambda": 0, "experiments": [{"label": "x"}, {"label": "x"}]})")
              .find("duplicate") != std::string::npos);
    CHECK(error_of(R"({"gamma": 1, "T": 2, "experiments": [{"label": "x"}]})").find("lambda") != std::string::npos);
    CHECK_FALSE(error_of(R"({"gamma": 1, "T": 2, "lambda": 0, "experiments": [{"solver": "hops"}]})").empty());
}

TEST_CASE("csv round trips") {
    ObservableTable t;
    DensitySeries s;
    for (int i = 0; i < 5; ++i) {
        t.times.push_back(0.05 * i);
        t.inner_correlation.push_back(std::sin(i + 0.1) / 3.0);
        t.inner_correlation_stderr.push_back(1e-3 / (i + 1));
        t.concurrence.push_back(std::exp(-0.3 * i));
        t.concurrence_stderr.push_back(1.0 / 7.0);
        t.ground_population.push_back(1.0 - std::exp(-0.3 * i));
        Operator rho = Operator::Zero();
        rho(0, 0) = 1.0 / 3.0;
        rho(3, 3) = 2.0 / 3.0;
        rho(0, 3) = Complex(0.1 / 3.0, std::sqrt(2.0) / 100.0 * i);
        rho(3, 0) = std::conj(rho(0, 3));
        s.times.push_back(t.times.back());
        s.rho.push_back(rho);
    }
    std::stringstream a, b;
    write_observables(a, t);
    const ObservableTable t2 = read_observables(a);
    CHECK(t2.times == t.times);
    CHECK(t2.inner_correlation == t.inner_correlation);
    CHECK(t2.inner_correlation_stderr == t.inner_correlation_stderr);
    CHECK(t2.concurrence == t.concurrence);
    CHECK(t2.concurrence_stderr == t.concurrence_stderr);
    CHECK(t2.ground_population == t.ground_population);

    write_density_series(b, s);
    const DensitySeries s2 = read_density_series(b);
    CHECK(s2.times == s.times);
    CHECK(s2.rho == s.rho);

    const auto d = compare_series(s, s2);
    for (double v : d.distance) CHECK(v == 0.0);
    DensitySeries shorter = s;
    shorter.times.pop_back();
    shorter.rho.pop_back();
    CHECK_THROWS(compare_series(s, shorter));
}

TEST_CASE("figure plans") {
    CHECK(figure_plan("fig1").size() == 18);
    CHECK(figure_plan("fig2").size() == 3);
    CHECK(figure_plan("fig3").size() == 12);
    CHECK_THROWS_AS(figure_plan("fig4"), ConfigError);
    for (const auto& e : figure_plan("fig1")) CHECK(e.config.t_final == (e.config.bandwidth == 5.0 ? 4.0 : 10.0));
}

TEST_CASE("fig3 starts at the Werner concurrence and is reproducible") {
    FigureOptions o;
    o.n_traj = 16;
    o.dt = 5e-3;
    o.t_final = 0.5;
    o.q_grid = {0.2, 0.8};
    const fs::path d1 = scratch("fig3a"), d2 = scratch("fig3b");
    const auto curves = run_figure("fig3", d1.string(), o);
    run_figure("fig3", d2.string(), o);
    REQUIRE(curves.size() == 4);
    CHECK(curves[0].observables.concurrence.front() == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(curves[2].observables.concurrence.front() == 0.0);
    for (const auto& c : curves) {
        CHECK(read_file((d1 / (c.label + ".csv")).string()) == read_file((d2 / (c.label + ".csv")).string()));
        CHECK(read_file((d1 / (c.label + "_rho.csv")).string()) ==
              read_file((d2 / (c.label + "_rho.csv")).string()));
    }
}

TEST_CASE("convergence report") {
    SUBCASE("decoupled runs agree to rounding") {
        SimulationConfig c;
        c.coupling = 0.0;
        c.t_final = 2.0;
        c.dt = 2e-3;
        c.n_traj = 8;
        c.initial = PureState::from_label("11+00");
        const ConvergenceReport r = convergence_report(c);
        CHECK(r.max_dt_deviation <= 1e-10);
    }
    SUBCASE("stochastic run") {
        SimulationConfig c;
        c.lambda = 0.6;
        c.t_final = 3.0;
        c.dt = 4e-3;
        c.n_traj = 400;
        c.output_stride = 0.1;
        c.initial = PureState::from_label("11+00");
        const ConvergenceReport r = convergence_report(c);
        std::ostringstream s;
        write_convergence_report(s, r);
        MESSAGE(s.str());
        CHECK(r.rows.size() == 5);
        CHECK(r.stderr_exponent >= -0.6);
        CHECK(r.stderr_exponent <= -0.4);
        // Paired OU paths differ pathwise at O(dt), so the shift between grids
        // is a dt / sqrt(N) fluctuation; it must sit far below the Monte Carlo error.
        CHECK(r.max_dt_deviation <= 0.05 * r.rows[0].mean_inner_correlation_stderr);
    }
}

TEST_CASE("noise check report") {
    SimulationConfig c;
    c.lambda = 0.6;
    const auto stats = noise_check(c, 4000);
    REQUIRE(stats.size() == 2);
    for (const auto& s : stats) {
        CHECK(s.lags.back() == doctest::Approx(3.0 / s.kernel.decay_rate));
        CHECK(s.max_relative_error < 0.2);
        CHECK(s.max_pseudo_zscore < 6.0);
    }
}

TEST_CASE("cli exit codes") {
    const fs::path d = scratch("cli");
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream((d / name).string()) << body;
        return (d / name).string();
    };
    const std::string good = write("good.json", R"({"lambda": 0.6, "gamma": 1, "T": 0.5, "n_traj": 8, "dt": 0.005})");
    const std::string bad = write("bad.json", R"({"lambda": 1.5, "gamma": 1, "T": 1})");
    const std::string blowup =
        write("blowup.json", R"({"lambda": 0.6, "gamma": 1, "T": 2, "n_traj": 4, "dt": 0.05, "Gamma": 4000, "mode": "linear"})");

    CHECK(cli("run --config " + good + " --out " + (d / "out").string() + " --dump-coefficients --dump-noise 3") == 0);
    CHECK(fs::exists(d / "out" / "run.csv"));
    CHECK(fs::exists(d / "out" / "run_rho.csv"));
    CHECK(fs::exists(d / "out" / "coefficients.csv"));
    CHECK(fs::exists(d / "out" / "noise_3.csv"));
    CHECK(cli("run --config " + good + " --solver lindblad --out " + (d / "lind").string()) == 0);
    CHECK(cli("compare " + (d / "out" / "run_rho.csv").string() + " " + (d / "lind" / "run_rho.csv").string() +
              " --out " + (d / "dist.csv").string()) == 0);
    CHECK(fs::exists(d / "dist.csv"));

    CHECK(cli("run --config " + bad) == 2);
    CHECK(cli("run") == 2);
    CHECK(cli("figure fig9 --out " + d.string()) == 2);
    CHECK(cli("run --config " + (d / "missing.json").string()) == 2);
    CHECK(cli("run --config " + blowup + " --out " + (d / "blow").string()) == 3);
    CHECK(cli("noise-check --config " + good + " --paths 200 --out " + (d / "noise").string()) == 0);
}

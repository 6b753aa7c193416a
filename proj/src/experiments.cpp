#include "nmqsd/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>
#include <sstream>

#include "nmqsd/errors.hpp"
#include "nmqsd/finite_mode.hpp"
#include "nmqsd/io.hpp"
#include "nmqsd/lindblad.hpp"
#include "nmqsd/trajectory.hpp"

namespace nmqsd {

CurveResult run_experiment(const Experiment& e) {
    CurveResult r;
    r.label = e.label;
    r.solver = e.solver;
    r.config = e.config;
    switch (e.solver) {
        case Solver::qsd: {
            EnsembleResult ens = run_ensemble(e.config);
            r.series = std::move(ens.series);
            r.observables = std::move(ens.observables);
            break;
        }
        case Solver::lindblad:
            r.series = run_lindblad(e.config);
            r.observables = ObservableTable::from_series(r.series);
            break;
        case Solver::finite_mode:
            r.series = run_finite_mode(e.config, e.finite_mode).series;
            r.observables = ObservableTable::from_series(r.series);
            break;
    }
    return r;
}

void write_curve(const std::string& out_dir, const CurveResult& curve) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path base(out_dir);
    std::ostringstream obs, rho;
    write_observables(obs, curve.observables);
    write_density_series(rho, curve.series);
    write_file((base / (curve.label + ".csv")).string(), obs.str());
    write_file((base / (curve.label + "_rho.csv")).string(), rho.str());
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

SimulationConfig figure_config(const FigureOptions& o) {
    SimulationConfig c;
    c.n_traj = o.n_traj;
    c.seed = o.seed;
    c.dt = o.dt;
    c.output_stride = o.output_stride;
    c.deterministic_reduction = o.deterministic_reduction;
    c.threads = o.threads;
    return c;
}

}  // namespace

std::vector<Experiment> figure_plan(const std::string& id, const FigureOptions& o) {
    std::vector<Experiment> plan;
    auto add = [&](std::string label, SimulationConfig c, double default_t) {
        c.t_final = o.t_final.value_or(default_t);
        Experiment e;
        e.label = std::move(label);
        e.config = c;
        plan.push_back(std::move(e));
    };
    if (id == "fig1") {
        const char* panels = "abcdef";
        int p = 0;
        for (const char* psi : {"11+00", "10+01"}) {
            for (double gamma : {0.2, 1.0, 5.0}) {
                for (double lambda : {0.2, 0.6, 1.0}) {
                    SimulationConfig c = figure_config(o);
                    c.bandwidth = gamma;
                    c.lambda = lambda;
                    c.initial = PureState::from_label(psi);
                    add(std::string("fig1") + panels[p] + "_gamma" + fmt(gamma) + "_lambda" + fmt(lambda), c,
                        gamma >= 5.0 ? 4.0 : 10.0);
                }
                ++p;
            }
        }
    } else if (id == "fig2") {
        for (double lambda : {0.2, 0.8, 1.0}) {
            SimulationConfig c = figure_config(o);
            c.lambda = lambda;
            c.initial = PureState::from_label("10");
            add("fig2_lambda" + fmt(lambda), c, 20.0);
        }
    } else if (id == "fig3") {
        for (double q : o.q_grid) {
            for (double gamma : {1.0, 5.0}) {
                SimulationConfig c = figure_config(o);
                c.lambda = 1.0;
                c.bandwidth = gamma;
                c.initial = werner_state(q);
                add(std::string("fig3") + (q < 2.0 / 3.0 ? "a" : "b") + "_Q" + fmt(q) + "_gamma" + fmt(gamma), c,
                    20.0);
            }
        }
    } else {
        throw ConfigError("unknown figure id '" + id + "' (expected fig1, fig2 or fig3)");
    }
    for (const auto& e : plan) e.config.validate();
    return plan;
}

std::vector<CurveResult> run_figure(const std::string& id, const std::string& out_dir, const FigureOptions& o) {
    std::vector<CurveResult> curves;
    for (const auto& e : figure_plan(id, o)) {
        curves.push_back(run_experiment(e));
        write_curve(out_dir, curves.back());
    }
    return curves;
}

namespace {

double max_difference(const ObservableTable& a, const ObservableTable& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.times.size() && i < b.times.size(); ++i) {
        d = std::max(d, std::abs(a.inner_correlation[i] - b.inner_correlation[i]));
        d = std::max(d, std::abs(a.concurrence[i] - b.concurrence[i]));
        d = std::max(d, std::abs(a.ground_population[i] - b.ground_population[i]));
    }
    return d;
}

double mean_stderr(const ObservableTable& t) {
    double s = 0.0;
    for (std::size_t i = 1; i < t.times.size(); ++i) s += t.inner_correlation_stderr[i];
    return t.times.size() > 1 ? s / static_cast<double>(t.times.size() - 1) : 0.0;
}

}  // namespace

ConvergenceReport convergence_report(const SimulationConfig& config) {
    config.validate();
    ConvergenceReport rep;
    auto run = [&](double dt, int refine, std::size_t n) {
        SimulationConfig c = config;
        c.dt = dt;
        c.refine_levels = refine;
        c.n_traj = std::max<std::size_t>(1, n);
        // keep the output times fixed while the step shrinks
        c.output_stride = static_cast<double>(config.stride_steps()) * config.dt;
        EnsembleResult r = run_ensemble(c);
        rep.rows.push_back({dt, c.n_traj, r.observables, mean_stderr(r.observables)});
    };
    const std::size_t n = config.n_traj;
    const int level = config.refine_levels;
    run(config.dt, level, n);
    run(config.dt / 2, level + 1, n);
    run(config.dt / 4, level + 2, n);
    run(config.dt, level, n / 4);
    run(config.dt, level, 4 * n);

    const auto& o1 = rep.rows[0].observables;
    const auto& o2 = rep.rows[1].observables;
    const auto& o4 = rep.rows[2].observables;
    const double e12 = max_difference(o1, o2);
    const double e24 = max_difference(o2, o4);
    rep.max_dt_deviation = std::max({e12, e24, max_difference(o1, o4)});
    rep.observed_order = (e12 > 1e-13 && e24 > 1e-13) ? std::log2(e12 / e24) : std::numeric_limits<double>::quiet_NaN();

    // least squares of log stderr against log n over the three ensemble sizes
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i : {std::size_t(3), std::size_t(0), std::size_t(4)}) {
        const double s = rep.rows[i].mean_inner_correlation_stderr;
        if (!(s > 0.0)) continue;
        const double x = std::log(static_cast<double>(rep.rows[i].n_traj)), y = std::log(s);
        sx += x, sy += y, sxx += x * x, sxy += x * y, ++m;
    }
    rep.stderr_exponent = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

void write_convergence_report(std::ostream& out, const ConvergenceReport& r) {
    char buf[160];
    out << "dt,n_traj,mean_C_xx_stderr,final_C_xx,final_concurrence\n";
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g,%.17g\n", row.dt, row.n_traj,
                      row.mean_inner_correlation_stderr, row.observables.inner_correlation.back(),
                      row.observables.concurrence.back());
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "# max_dt_deviation=%.6g observed_order=%.4g stderr_exponent=%.4g\n",
                  r.max_dt_deviation, r.observed_order, r.stderr_exponent);
    out << buf;
}

std::vector<NoiseStatistics> noise_check(const SimulationConfig& config, std::size_t paths) {
    config.validate();
    if (paths < 2) throw ConfigError("noise-check needs at least two paths");
    const BathModel model = build_bath_model(config);
    const std::vector<ExponentialKernel> kernels = model.kernels();
    constexpr int kLags = 12;          // 0 .. 3/gamma_x in quarter correlation times
    constexpr std::size_t kSteps = 120;  // path length 60/gamma_x
    std::vector<NoiseStatistics> out;
    for (std::size_t x = 0; x < kernels.size(); ++x) {
        const ExponentialKernel& k = kernels[x];
        const TimeGrid grid{0.5 / k.decay_rate, kSteps};
        const std::size_t len = grid.fine_count();
        std::vector<Complex> corr(kLags + 1), pseudo(kLags + 1), mean(len);
        std::vector<double> corr2(kLags + 1), pseudo2(kLags + 1), var(len), var2(len);
        for (std::size_t p = 0; p < paths; ++p) {
            const NoisePath path = sample_noise_path(kernels, grid, config.seed, p, config.refine_levels);
            const auto& z = path.baths[x];
            for (int m = 0; m <= kLags; ++m) {
                Complex c = 0.0, q = 0.0;
                for (std::size_t i = 0; i + m < len; ++i) {
                    c += std::conj(z[i]) * z[i + m];
                    q += z[i] * z[i + m];
                }
                c /= static_cast<double>(len - m);
                q /= static_cast<double>(len - m);
                corr[m] += c;
                corr2[m] += std::norm(c);
                pseudo[m] += q;
                pseudo2[m] += std::norm(q);
            }
            for (std::size_t i = 0; i < len; ++i) {
                mean[i] += z[i];
                var[i] += std::norm(z[i]);
                var2[i] += std::norm(z[i]) * std::norm(z[i]);
            }
        }
        const double n = static_cast<double>(paths);
        NoiseStatistics s;
        s.bath = static_cast<int>(x);
        s.kernel = k;
        s.paths = paths;
        for (int m = 0; m <= kLags; ++m) {
            const double lag = m * grid.dt / 2.0;
            const Complex c = corr[m] / n;
            s.lags.push_back(lag);
            s.correlation.push_back(c);
            s.max_relative_error = std::max(s.max_relative_error, std::abs(c - k(lag)) / k(lag));
            const Complex q = pseudo[m] / n;
            const double se = std::sqrt(std::max(0.0, pseudo2[m] / n - std::norm(q)) / n);
            s.max_pseudo_zscore = std::max(s.max_pseudo_zscore, std::abs(q) / se);
        }
        double vbar = 0.0;
        for (std::size_t i = 0; i < len; ++i) vbar += var[i] / n;
        vbar /= static_cast<double>(len);
        for (std::size_t i = 0; i < len; ++i) {
            s.max_mean_ratio = std::max(s.max_mean_ratio, std::abs(mean[i] / n) / std::sqrt(k.amplitude / n));
            const double v = var[i] / n;
            const double se = std::sqrt(std::max(0.0, var2[i] / n - v * v) / n);
            s.max_variance_zscore = std::max(s.max_variance_zscore, std::abs(v - vbar) / se);
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_noise_check(std::ostream& out, const std::vector<NoiseStatistics>& stats) {
    char buf[200];
    out << "bath,lag,re_empirical,im_empirical,kernel\n";
    for (const auto& s : stats)
        for (std::size_t i = 0; i < s.lags.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%c,%.17g,%.17g,%.17g,%.17g\n", "ab"[s.bath], s.lags[i],
                          s.correlation[i].real(), s.correlation[i].imag(), s.kernel(s.lags[i]));
            out << buf;
        }
    for (const auto& s : stats) {
        std::snprintf(buf, sizeof buf,
                      "# bath %c: paths=%zu max_rel_err=%.4g max_zz_zscore=%.3g max_mean_ratio=%.3g "
                      "max_variance_zscore=%.3g\n",
                      "ab"[s.bath], s.paths, s.max_relative_error, s.max_pseudo_zscore, s.max_mean_ratio,
                      s.max_variance_zscore);
        out << buf;
    }
}

}  // namespace nmqsd

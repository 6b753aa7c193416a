// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "nmqsd/coefficients.hpp"
#include "nmqsd/experiments.hpp"
#include "nmqsd/finite_mode.hpp"
#include "nmqsd/io.hpp"
#include "nmqsd/lindblad.hpp"
#include "nmqsd/trajectory.hpp"

using namespace nmqsd;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

SimulationConfig config(double gamma, double lambda, InitialState psi, double t_final, std::size_t n = 1000) {
    SimulationConfig c;
    c.bandwidth = gamma;
    c.lambda = lambda;
    c.initial = std::move(psi);
    c.t_final = t_final;
    c.n_traj = n;
    c.dt = 1e-3;
    c.output_stride = 0.05;
    return c;
}

InitialState label(const char* s) { return PureState::from_label(s); }

// window mean of a column and the mean of its per-row stderr
std::array<double, 2> window(const ObservableTable& t, const std::vector<double>& v, const std::vector<double>& se,
                             double t0, double t1) {
    double s = 0, e = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.times.size(); ++i)
        if (t.times[i] >= t0 - 1e-9 && t.times[i] <= t1 + 1e-9) s += v[i], e += se[i], ++n;
    return {s / n, e / n};
}

void plateau() {
    const auto r = run_ensemble(config(1.0, 1.0, label("10"), 20.0));
    const auto o = r.observables;
    const auto [c, se] = window(o, o.concurrence, o.concurrence_stderr, 15.0, 20.0);
    report(1, std::abs(c - 0.5) <= 0.05, fmt("mean concurrence on [15,20] = %.4f (stderr %.4f), target 0.5 +- 0.05", c, se));
}

void werner_steady_state() {
    bool ok = true;
    std::string detail;
    for (double q : {0.4, 0.8}) {
        std::array<double, 2> at[2];
        for (int g = 0; g < 2; ++g) {
            const double gamma = g == 0 ? 1.0 : 5.0;
            // the steady state is nearly deterministic (stderr ~1e-6), so the
            // window must sit where the gamma = 1 transient is below that
            auto c = config(gamma, 1.0, werner_state(q), 50.0);
            c.output_stride = 0.25;
            const auto r = run_ensemble(c);
            const auto& o = r.observables;
            at[g] = window(o, o.concurrence, o.concurrence_stderr, 45.0, 50.0);
            ok = ok && std::abs(at[g][0] - q / 4) <= 0.05;
        }
        const double combined = std::hypot(at[0][1], at[1][1]);
        ok = ok && std::abs(at[0][0] - at[1][0]) <= combined;
        detail += fmt("Q=%.1f: C(gamma=1)=%.6f C(gamma=5)=%.6f target %.2f, |diff| %.3g vs combined stderr %.3g; ", q,
                      at[0][0], at[1][0], q / 4, std::abs(at[0][0] - at[1][0]), combined);
    }
    report(2, ok, detail);
}

void werner_initial() {
    double worst = 0.0;
    for (double q : {0.0, 0.2, 2.0 / 3.0, 1.0})
        worst = std::max(worst, std::abs(concurrence(werner_state(q)) - std::max(0.0, 1.0 - 1.5 * q)));
    // and through an ensemble run, whose first row is the exact initial state
    auto c = config(1.0, 1.0, werner_state(0.2), 0.1, 40);
    worst = std::max(worst, std::abs(run_ensemble(c).observables.concurrence.front() - 0.7));
    report(3, worst <= 1e-12, fmt("max |C(0) - max(0, 1 - 1.5Q)| = %.3g", worst));
}

void markov_rate() {
    bool ok = true;
    std::string detail;
    for (double lambda : {0.0, 0.5}) {
        auto c = config(1.0, lambda, label("10+01"), 4.0);
        const auto s = run_lindblad(c);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (std::size_t i = 0; i < s.times.size(); ++i) {
            const double t = s.times[i];
            if (t < 0.5) continue;
            const double y = std::log(std::abs(inner_correlation(DensityMatrix(s.rho[i], 1e-8))));
            sx += t, sy += y, sxx += t * t, sxy += t * y, ++n;
        }
        const double rate = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double expect = 2.0 / (1.0 + lambda);
        ok = ok && std::abs(rate / expect - 1.0) <= 0.02;
        detail += fmt("lambda=%.1f rate %.5f expected %.5f; ", lambda, rate, expect);
    }
    report(4, ok, detail);
}

void absorbing_state() {
    bool ok = true;
    double worst_qsd = 1.0, worst_lind = 1.0;
    for (const char* psi : {"11+00", "10+01"})
        for (double gamma : {0.2, 1.0, 5.0})
            for (double lambda : {0.2, 0.6}) {
                auto c = config(gamma, lambda, label(psi), 30.0, 500);
                c.dt = gamma == 5.0 ? 1e-3 : 2e-3;
                c.output_stride = 1.0;
                const auto r = run_ensemble(c);
                worst_qsd = std::min(worst_qsd, r.observables.ground_population.back());
                c.t_final = 60.0;
                c.dt = 1e-3;
                worst_lind = std::min(worst_lind, run_lindblad(c).rho.back()(k00, k00).real());
            }
    ok = worst_qsd >= 0.95 && worst_lind >= 1.0 - 1e-6;
    report(5, ok, fmt("min ground fidelity: QSD at t=30 %.5f (>= 0.95), Lindblad at t=60 1 - %.3g", worst_qsd,
                      1.0 - worst_lind));
}

void oracle_equivalence() {
    bool ok = true;
    std::string detail;
    for (auto [gamma, lambda] : {std::pair{1.0, 0.6}, std::pair{0.2, 0.2}}) {
        auto c = config(gamma, lambda, label("11+00"), 5.0, 2000);
        c.output_stride = 0.1;
        const auto q = run_ensemble(c);
        const auto f = run_finite_mode(c, {200, 20.0});
        const auto d = compare_series(q.series, f.series);
        const double worst = *std::max_element(d.distance.begin(), d.distance.end());
        ok = ok && worst <= 0.05;
        detail += fmt("(gamma=%.1f, lambda=%.1f) max trace distance %.4f; ", gamma, lambda, worst);
    }
    report(6, ok, detail);
}

void markov_crossover() {
    bool ok = true;
    std::string detail;
    for (const char* psi : {"11+00", "10+01"}) {
        auto c = config(5.0, 0.6, label(psi), 4.0);
        const auto q = run_ensemble(c).observables;
        const auto l = ObservableTable::from_series(run_lindblad(c));
        double worst = 0.0;
        for (std::size_t i = 0; i < q.times.size(); ++i)
            worst = std::max(worst, std::abs(q.inner_correlation[i] - l.inner_correlation[i]));
        ok = ok && worst <= 0.08;
        detail += fmt("%s: max |C_xx(QSD) - C_xx(Lindblad)| = %.4f; ", psi, worst);
    }
    report(7, ok, detail);
}

void linear_nonlinear() {
    auto c = config(1.0, 0.6, label("11+00"), 5.0, 1000);
    c.dt = 2e-3;
    c.mode = QsdMode::linear;
    const auto m = run_ensemble(c);
    double norm_dev = 0.0;
    for (double v : m.mean_norm2) norm_dev = std::max(norm_dev, std::abs(v - 1.0));

    c.n_traj = 2000;
    const auto lin = run_ensemble(c);
    c.mode = QsdMode::nonlinear;
    const auto non = run_ensemble(c);
    const auto d = compare_series(lin.series, non.series);
    const double worst = *std::max_element(d.distance.begin(), d.distance.end());
    report(8, norm_dev <= 0.1 && worst <= 0.03,
           fmt("max |M[|psi|^2] - 1| = %.4f, linear vs nonlinear trace distance %.4f", norm_dev, worst));
}

NoisePath smooth_probe(const TimeGrid& grid, int baths) {
    NoisePath p;
    p.fine_step = grid.dt / 2;
    for (int x = 0; x < baths; ++x) {
        std::vector<Complex> z(grid.fine_count());
        for (std::size_t k = 0; k < z.size(); ++k) {
            const double t = grid.fine_time(k);
            z[k] = Complex(std::cos(1.3 * t + x), 0.5 * std::sin(0.7 * t - x));
        }
        p.baths.push_back(std::move(z));
    }
    return p;
}

void consistency() {
    auto system_for = [](double kappa) {
        SimulationConfig c;
        c.kappa = kappa;
        c.lambda = 0.6;
        const BathModel m = build_bath_model(c);
        return CoefficientSystem(m.system.hamiltonian, m.channels);
    };
    const CoefficientSystem full = system_for(1.0);
    double res[2];
    for (int r = 0; r < 2; ++r) {
        const TimeGrid grid = TimeGrid::covering(2.0, 0.02 / (1 << r));
        ResidualOptions opt;
        opt.max_pairs = 0;
        res[r] = consistency_residual(full, evolve_coefficients(full, grid), smooth_probe(grid, 2), opt);
    }

    // kappa = 0: residual and the scalar Riccati pair dF_x = A - g_x F_x + (i w + F_a + F_b) F_x
    const CoefficientSystem scalar = system_for(0.0);
    const double dt = 1e-3;
    const TimeGrid grid = TimeGrid::covering(2.0, dt);
    const OCoefficients co = evolve_coefficients(scalar, grid);
    const double res0 = consistency_residual(scalar, co, smooth_probe(grid, 2));
    const double amp = 0.5, g[2] = {1.6, 0.4}, w = 1.0;
    std::array<Complex, 2> f{0.0, 0.0};
    auto rhs = [&](const std::array<Complex, 2>& v) {
        const Complex s = kI * w + v[0] + v[1];
        return std::array<Complex, 2>{amp - g[0] * v[0] + s * v[0], amp - g[1] * v[1] + s * v[1]};
    };
    auto axpy = [](const std::array<Complex, 2>& a, double h, const std::array<Complex, 2>& b) {
        return std::array<Complex, 2>{a[0] + h * b[0], a[1] + h * b[1]};
    };
    double riccati = 0.0;
    const double h = dt / 2;
    for (std::size_t k = 0; k < 2 * grid.steps; ++k) {
        const auto k1 = rhs(f), k2 = rhs(axpy(f, h / 2, k1)), k3 = rhs(axpy(f, h / 2, k2)), k4 = rhs(axpy(f, h, k3));
        for (int x = 0; x < 2; ++x) f[x] += h / 6 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
        if (k % 2 == 1)
            for (int x = 0; x < 2; ++x) riccati = std::max(riccati, std::abs(co.F(x, 0, (k + 1) / 2) - f[x]));
    }
    const bool ok = res[0] / res[1] >= 3.5 && res0 <= 1e-5 && riccati <= 1e-5;
    report(9, ok,
           fmt("kappa=1 residual %.3g -> %.3g (ratio %.2f); kappa=0 residual %.3g, Riccati mismatch %.3g", res[0],
               res[1], res[0] / res[1], res0, riccati));
}

void death_and_revival() {
    // zero = concurrence below eps, revival = first return above eps
    const double eps = 0.005;
    double death[2], revival[2];
    bool found = true;
    for (int g = 0; g < 2; ++g) {
        const auto r = run_ensemble(config(g == 0 ? 1.0 : 5.0, 1.0, werner_state(0.3), 20.0));
        const auto& o = r.observables;
        death[g] = revival[g] = NAN;
        std::size_t i = 0;
        while (i < o.times.size() && o.concurrence[i] > eps) ++i;
        if (i < o.times.size()) death[g] = o.times[i];
        while (i < o.times.size() && o.concurrence[i] <= eps) ++i;
        if (i < o.times.size()) revival[g] = o.times[i];
        found = found && std::isfinite(death[g]) && std::isfinite(revival[g]);
    }
    const bool earlier = revival[1] < revival[0];
    const bool longer = revival[1] - death[1] > revival[0] - death[0];
    report(10, found && earlier && longer,
           fmt("gamma=1: death %.2f revival %.2f; gamma=5: death %.2f revival %.2f; earlier revival for gamma=5: %s, "
               "longer zero interval for gamma=5: %s",
               death[0], revival[0], death[1], revival[1], earlier ? "yes" : "no", longer ? "yes" : "no"));
}

void noise_statistics() {
    SimulationConfig c;
    c.lambda = 0.6;
    const auto stats = noise_check(c, 100000);
    double rel = 0.0, z = 0.0;
    for (const auto& s : stats) rel = std::max(rel, s.max_relative_error), z = std::max(z, s.max_pseudo_zscore);
    report(11, rel <= 0.05 && z <= 5.0,
           fmt("max relative kernel error %.4f (<= 0.05), max |M[zz]| / stderr %.2f (<= 5)", rel, z));
}

}  // namespace

int main(int argc, char** argv) {
    // optional arguments select criteria by number
    const auto start = std::chrono::steady_clock::now();
    const std::vector<void (*)()> checks{plateau,          werner_steady_state, werner_initial,   markov_rate,
                                         absorbing_state,  oracle_equivalence,  markov_crossover, linear_nonlinear,
                                         consistency,      death_and_revival,   noise_statistics};
    std::vector<bool> selected(checks.size(), argc == 1);
    for (int a = 1; a < argc; ++a) {
        const std::size_t id = std::stoul(argv[a]);
        if (id >= 1 && id <= checks.size()) selected[id - 1] = true;
    }
    for (std::size_t i = 0; i < checks.size(); ++i) {
        if (!selected[i]) continue;
        try {
            checks[i]();
        } catch (const std::exception& e) {
            report(static_cast<int>(i + 1), false, std::string("error: ") + e.what());
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%d of %zu criteria failed (%.0f s)\n", failures, checks.size(), secs);
    return failures == 0 ? 0 : 1;
}

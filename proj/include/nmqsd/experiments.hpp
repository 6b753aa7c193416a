#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nmqsd/config.hpp"

namespace nmqsd {

struct CurveResult {
    std::string label;
    Solver solver = Solver::qsd;
    SimulationConfig config;
    DensitySeries series;
    ObservableTable observables;
};

CurveResult run_experiment(const Experiment& e);

/// Writes <label>.csv (observables) and <label>_rho.csv (density series).
void write_curve(const std::string& out_dir, const CurveResult& curve);

struct FigureOptions {
    std::size_t n_traj = 1000;
    std::uint64_t seed = 20150519;
    double dt = 1e-3;
    double output_stride = 0.05;
    bool deterministic_reduction = true;
    unsigned threads = 0;
    std::vector<double> q_grid{0.2, 0.4, 0.6, 0.7, 0.8, 1.0};
    /// Overrides every curve's horizon (defaults: fig1 10 or 4, fig2/fig3 20).
    std::optional<double> t_final;
};

/// Curves of fig1, fig2 or fig3. Throws ConfigError for other ids.
std::vector<Experiment> figure_plan(const std::string& id, const FigureOptions& options = {});

/// Runs every curve of the figure and writes one CSV pair per curve.
std::vector<CurveResult> run_figure(const std::string& id, const std::string& out_dir,
                                    const FigureOptions& options = {});

struct ConvergenceRow {
    double dt;
    std::size_t n_traj;
    ObservableTable observables;
    double mean_inner_correlation_stderr;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;  // dt, dt/2, dt/4 at N; then N/4 and 4N at dt
    /// Largest |difference| of C_xx, concurrence or ground population between
    /// any two of the three step sizes.
    double max_dt_deviation = 0.0;
    /// log2(|O(dt) - O(dt/2)| / |O(dt/2) - O(dt/4)|) from the maxima over time;
    /// NaN when both differences are at rounding level.
    double observed_order = 0.0;
    /// Slope of log(stderr of C_xx) against log(n_traj).
    double stderr_exponent = 0.0;
};

ConvergenceReport convergence_report(const SimulationConfig& config);
void write_convergence_report(std::ostream& out, const ConvergenceReport& report);

struct NoiseStatistics {
    int bath = 0;
    ExponentialKernel kernel;
    std::size_t paths = 0;
    std::vector<double> lags;
    std::vector<Complex> correlation;  // M[z*_t z_{t+lag}]
    double max_relative_error = 0.0;   // over lags <= 3 / gamma_x
    double max_pseudo_zscore = 0.0;    // |M[z_t z_{t+lag}]| / stderr
    double max_mean_ratio = 0.0;       // max_t |M[z_t]| / sqrt(A / paths)
    double max_variance_zscore = 0.0;  // stationarity of M[|z_t|^2]
};

/// Draws `paths` noise paths of every active bath with the production sampler
/// and compares their statistics with the kernel. Stationarity is exploited by
/// averaging each path over all start times before forming standard errors
/// across paths.
std::vector<NoiseStatistics> noise_check(const SimulationConfig& config, std::size_t paths = 100000);
void write_noise_check(std::ostream& out, const std::vector<NoiseStatistics>& stats);

}  // namespace nmqsd

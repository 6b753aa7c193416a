// Run parameters shared by the QSD engine and the oracles.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "nmqsd/coefficients.hpp"
#include "nmqsd/noise.hpp"
#include "nmqsd/two_qubit.hpp"

namespace nmqsd {

enum class QsdMode { linear, nonlinear };

using InitialState = std::variant<PureState, DensityMatrix>;

struct SimulationConfig {
    double omega_a = 1.0;
    double omega_b = 1.0;
    double kappa = 1.0;
    double lambda = 0.0;
    double coupling = 1.0;   // Gamma; 0 decouples the qubits from both baths
    double bandwidth = 1.0;  // gamma
    InitialState initial = PureState::from_label("10");
    double t_final = 10.0;
    double dt = 1e-3;
    double output_stride = 0.05;
    std::size_t n_traj = 1000;
    std::uint64_t seed = 20150519;
    QsdMode mode = QsdMode::nonlinear;
    /// Noise is drawn at dt * 2^refine_levels and bridged down to dt.
    int refine_levels = 0;
    bool deterministic_reduction = true;
    std::size_t failure_budget = 0;
    /// Worker threads; 0 selects std::thread::hardware_concurrency().
    unsigned threads = 0;

    /// Throws ConfigError on any violated invariant.
    void validate() const;
    TimeGrid grid() const { return TimeGrid::covering(t_final, dt); }
    /// Coarse steps between two output rows.
    std::size_t stride_steps() const;
};

/// Couplings and kernels of the effective baths for a configuration: bath a
/// always, bath b only for |lambda| < 1, none at all when coupling == 0.
struct BathModel {
    SystemOperators system;
    std::vector<BathChannel> channels;

    std::vector<ExponentialKernel> kernels() const;
};

BathModel build_bath_model(const SimulationConfig& config);

/// Spectral decomposition of the initial state into (weight, ket) pairs with
/// weight > 1e-12, largest weight first.
std::vector<std::pair<double, PureState>> decompose_initial(const InitialState& initial);

/// Largest-remainder apportionment of `total` over `weights`.
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total);

struct DensitySeries {
    std::vector<double> times;
    std::vector<Operator> rho;
};

/// Observables per output time. Standard errors are zero for deterministic
/// solvers.
struct ObservableTable {
    std::vector<double> times;
    std::vector<double> inner_correlation, inner_correlation_stderr;
    std::vector<double> concurrence, concurrence_stderr;
    std::vector<double> ground_population;

    static ObservableTable from_series(const DensitySeries& series);
};

}  // namespace nmqsd

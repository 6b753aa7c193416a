// Single QSD trajectories and their ensemble reduction.

#pragma once

#include <cstddef>
#include <vector>

#include "nmqsd/coefficients.hpp"
#include "nmqsd/noise.hpp"
#include "nmqsd/simulation.hpp"

namespace nmqsd {

struct TrajectoryState {
    Ket psi;
    std::size_t t_index = 0;
    BathVector memory;      // m_x(t); unused in linear mode
    BathVector obar_noise;  // Z_x(t) of Obar_x
    bool record_history = false;
    /// Shifted noise (raw noise in linear mode) at visited grid points.
    std::vector<std::vector<Complex>> history;
};

/// Noise of every bath at the start, midpoint and end of one step.
struct StageNoise {
    BathVector start, mid, end;
};

StageNoise stage_noise(const NoisePath& path, std::size_t step);

/// Integrates trajectories against a precomputed coefficient set. Holds
/// references; the system and coefficients must outlive it.
class TrajectoryIntegrator {
  public:
    static constexpr double kNormGuard = 1e8;

    TrajectoryIntegrator(const CoefficientSystem& system, const OCoefficients& coeffs);

    TrajectoryState initial_state(const Ket& psi0, const NoisePath* noise = nullptr,
                                  bool record_history = false) const;

    /// psi' = (-iH + sum_x L_x z_x - L_x^dag Obar_x[z]) psi, one RK4 step.
    /// Throws NumericalError if the norm leaves [1/kNormGuard, kNormGuard].
    void step_linear(TrajectoryState& state, const StageNoise& noise) const;

    /// Normalized equation with shifted noise z~ = z + m; psi is renormalized
    /// after the step.
    void step_nonlinear(TrajectoryState& state, const StageNoise& noise) const;

    const OCoefficients& coefficients() const { return *coeffs_; }
    int bath_count() const { return nb_; }

  private:
    struct LinearStage {
        Ket psi;
        BathVector zbar;
    };
    struct NonlinearStage {
        Ket psi;
        BathVector zbar;
        BathVector memory;
    };
    LinearStage linear_rhs(std::size_t k, const LinearStage& s, const BathVector& z) const;
    NonlinearStage nonlinear_rhs(std::size_t k, const NonlinearStage& s, const BathVector& z) const;

    const CoefficientSystem* system_;
    const OCoefficients* coeffs_;
    int nb_;
    Operator minus_i_h_;
    std::vector<Operator> coupling_;
    std::vector<Operator> coupling_dag_;
    std::vector<Operator> dag_pair_;  // L_x^dag A-B-
};

struct EnsembleResult {
    DensitySeries series;
    ObservableTable observables;
    /// M[||psi_t||^2]; identically 1 in nonlinear mode.
    std::vector<double> mean_norm2;
    std::size_t trajectories = 0;
    std::size_t failures = 0;
};

/// Runs config.n_traj trajectories (split over the spectral components of a
/// mixed initial state) and reduces them to rho_t at every output row.
EnsembleResult run_ensemble(const SimulationConfig& config);

/// Same, reusing coefficients computed for the configuration's grid.
EnsembleResult run_ensemble(const SimulationConfig& config, const CoefficientSystem& system,
                            const OCoefficients& coeffs);

}  // namespace nmqsd

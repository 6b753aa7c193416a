// Discretized-bath oracle. Each effective bath is replaced by a finite set of
// modes on a uniform frequency grid and the full Hamiltonian is evolved
// exactly in the subspace of at most two excitations.

#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "nmqsd/simulation.hpp"

namespace nmqsd {

struct DiscretizedBath {
    ExponentialKernel kernel;
    std::vector<double> frequency;  // midpoints of a uniform grid on [-cutoff, cutoff]
    std::vector<double> coupling;   // g_j^2 = S(w_j) dw
    double spacing = 0.0;
    double cutoff = 0.0;

    /// sum_j g_j^2 exp(-i w_j tau)
    Complex correlation(double tau) const;
    double total_weight() const;
    double recurrence_time() const;
};

/// Lorentzian spectral density whose Fourier transform is the kernel.
double spectral_density(const ExponentialKernel& kernel, double omega);

/// One bath per active channel of build_bath_model(config), in the same order.
/// The cutoff of bath x is cutoff_multiple * gamma_x. Requires modes >= 50 and
/// cutoff_multiple >= 10.
std::vector<DiscretizedBath> build_discretized_baths(const SimulationConfig& config, int modes,
                                                     double cutoff_multiple);

struct BathMode {
    double frequency;
    double coupling;
    int channel;  // index into the jump operator list
};

/// H = H_S + sum_m w_m n_m + sum_m g_m (L_{c(m)} a_m^dag + h.c.) on the sector
/// basis: {|s> vac}, {|s> 1_m : s one excitation}, {|00> 1_m 1_n : m <= n}.
class SectorHamiltonian {
  public:
    using Sparse = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

    SectorHamiltonian(const Operator& system_hamiltonian, const std::vector<Operator>& jumps,
                      std::vector<BathMode> modes);

    Eigen::Index dimension() const { return dim_; }
    int mode_count() const { return static_cast<int>(modes_.size()); }
    const Sparse& matrix() const { return h_; }

    Eigen::VectorXcd embed(const Ket& system_state) const;
    Operator reduce(const Eigen::VectorXcd& state) const;
    double excitation_number(const Eigen::VectorXcd& state) const;

    /// Row/column of the basis ket with system index s and the given bath
    /// occupation (-1 for an empty slot; m <= n for pairs); -1 if not present.
    Eigen::Index index(int s, int m = -1, int n = -1) const;

    /// Upper bound on the spectral radius (max absolute row sum).
    double norm_bound() const { return norm_bound_; }

  private:
    std::vector<BathMode> modes_;
    Eigen::Index dim_ = 0;
    Sparse h_;
    double norm_bound_ = 0.0;
};

/// Norm-preserving Krylov step psi <- exp(-i H h) psi.
class LanczosPropagator {
  public:
    explicit LanczosPropagator(const SectorHamiltonian::Sparse& h, int krylov_dim = 24);
    void step(Eigen::VectorXcd& psi, double h) const;

  private:
    const SectorHamiltonian::Sparse* h_;
    int krylov_dim_;
};

struct FiniteModeOptions {
    int modes_per_bath = 200;
    double cutoff_multiple = 20.0;
};

struct FiniteModeResult {
    DensitySeries series;
    std::vector<double> excitation_number;
    std::vector<double> norm;
};

/// Throws ConfigError when t_final exceeds 80% of the shortest recurrence
/// time 2 pi / dw.
FiniteModeResult run_finite_mode(const SimulationConfig& config, const FiniteModeOptions& options = {});

}  // namespace nmqsd

// Operators, states and observables on the two-qubit space.
//
// Basis order is fixed everywhere as |11>, |10>, |01>, |00> with qubit A
// written first. |1> is the excited level: sigma_z|1> = |1>, sigma_-|1> = |0>.

#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nmqsd {

using Complex = std::complex<double>;
using Operator = Eigen::Matrix4cd;
using Ket = Eigen::Vector4cd;

inline constexpr Complex kI{0.0, 1.0};

enum BasisIndex : int { k11 = 0, k10 = 1, k01 = 2, k00 = 3 };

namespace ops {
Operator identity();
Operator sigma_minus_a();
Operator sigma_minus_b();
Operator sigma_z_a();
Operator sigma_z_b();
Operator sigma_x_a();
Operator sigma_x_b();
Operator sigma_y_a();
Operator sigma_y_b();
Operator commutator(const Operator& x, const Operator& y);
}  // namespace ops

struct SystemOperators {
    Operator hamiltonian;
    Operator l_a;  // sigma^A_- + kappa sigma^B_-
    Operator l_b;  // sigma^A_- - kappa sigma^B_-
};

SystemOperators build_system(double omega_a, double omega_b, double kappa);

class PureState {
  public:
    /// Normalizes `amplitudes`; throws std::invalid_argument on a zero or
    /// non-finite vector.
    explicit PureState(const Ket& amplitudes);

    /// Accepts "11", "10", "01", "00" and the Bell combinations "11+00",
    /// "10+01", "10-01" (each normalized).
    static PureState from_label(const std::string& label);

    const Ket& amplitudes() const { return amplitudes_; }

  private:
    Ket amplitudes_;
};

class DensityMatrix {
  public:
    static constexpr double kDefaultTolerance = 1e-8;

    /// Validates Hermiticity and unit trace within `tolerance`. Eigenvalues
    /// are not checked; Monte Carlo estimates may carry small negative
    /// residues, which only concurrence() clips.
    explicit DensityMatrix(const Operator& entries, double tolerance = kDefaultTolerance);

    static DensityMatrix from_pure(const PureState& psi);

    const Operator& matrix() const { return entries_; }
    Complex operator()(int row, int col) const { return entries_(row, col); }

  private:
    Operator entries_;
};

/// (Q/4) I + (1 - Q) |psi><psi| with |psi> = (|10> + |01>)/sqrt(2).
DensityMatrix werner_state(double q);

/// Wootters concurrence via the Hermitian form sqrt(rho) R sqrt(rho), evaluated
/// as singular values of the tau matrix.
double concurrence(const DensityMatrix& rho);

/// Same quantity from the eigenvalues of the non-Hermitian product rho R.
/// Kept as an independent route for validation; runs in long double.
double concurrence_nonhermitian(const DensityMatrix& rho);

/// <sigma_x^A sigma_x^B>.
double inner_correlation(const DensityMatrix& rho);

/// <psi|rho|psi> for a normalized ket.
double population(const Operator& rho, const Ket& psi);

/// 0.5 * || a - b ||_1 for Hermitian arguments.
double trace_distance(const Operator& a, const Operator& b);

DensityMatrix ensemble_average(std::span<const PureState> states,
                               std::span<const double> weights = {});

/// One block of 4 rows x 8 columns, interleaved real and imaginary parts,
/// comma separated with 17 significant digits.
void write_operator_block(std::ostream& out, const Operator& op);
Operator read_operator_block(std::istream& in);

}  // namespace nmqsd

// The O-operator engine.
//
// The functional derivative of the trajectory with respect to the noise of
// bath x is represented by
//
//   O_x(t,s) = f_x1 A- + f_x2 B- + f_x3 Az B- + f_x4 Bz A- + i Z_x(t,s) A-B-,
//   Z_x(t,s) = sum_w int_0^t p_xw(t,s,s') z_w(s') ds',
//
// and enters the drift only through Obar_x(t) = int_0^t alpha_x(t,s) O_x(t,s) ds.
// Writing F_xj = int alpha_x f_xj and P_xw(t,s') = int alpha_x p_xw(.,.,s'),
// the consistency condition closes on (F, R) with
//
//   R_xy(t) = int_0^t alpha_x(t,s) P_yx(t,s) ds,
//
// while every column s' of P obeys the same linear equation
// dP(t,s')/dt = K(t) P(t,s') with the boundary P(t,t) fixed by F(t). All of
// this is noise-independent, so it is solved once per parameter set.
//
// The generator is assembled from 4x4 commutators projected onto the
// lowering basis, rather than from hand-expanded component equations.

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "nmqsd/errors.hpp"
#include "nmqsd/noise.hpp"
#include "nmqsd/two_qubit.hpp"

namespace nmqsd {

inline constexpr int kMaxBaths = 2;

using BathVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1, 0, kMaxBaths, 1>;
using BathMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxBaths, kMaxBaths>;
/// Coefficients on {A-, B-, Az B-, Bz A-}.
using Lowering = Eigen::Vector4cd;
using LoweringRows = Eigen::Matrix<Complex, Eigen::Dynamic, 4, Eigen::RowMajor, kMaxBaths, 4>;

namespace lowering {
/// A-, B-, Az B-, Bz A-.
const std::array<Operator, 4>& basis();
/// A- B-, the only operator lowering the excitation number by two.
const Operator& pair();
Operator compose(const Lowering& f);
Lowering project(const Operator& x);
Complex pair_coefficient(const Operator& x);
/// Frobenius norm of the part of x outside span{basis, pair}.
double outside_span(const Operator& x);
}  // namespace lowering

struct BathChannel {
    ExponentialKernel kernel;
    Operator coupling;  // L_x
};

struct CoefficientState {
    LoweringRows F;  // row x: F_x1..F_x4
    BathMatrix R;    // R_xy = int alpha_x(t,s) P_yx(t,s) ds
};

/// Evolution rules for the O-operator coefficients of a given system.
class CoefficientSystem {
  public:
    CoefficientSystem(const Operator& hamiltonian, std::vector<BathChannel> channels);

    int bath_count() const { return static_cast<int>(channels_.size()); }
    const std::vector<BathChannel>& channels() const { return channels_; }
    const Operator& hamiltonian() const { return hamiltonian_; }

    /// f_x(t,t), read off O_x(t,t) = L_x.
    const Lowering& initial_coefficients(int x) const { return initial_[x]; }

    CoefficientState zero_state() const;
    CoefficientState derivative(const CoefficientState& state) const;

    /// Deterministic part of Obar_x.
    Operator obar_deterministic(const CoefficientState& state, int x) const;
    /// -i H - sum_y L_y^dag Fbar_y.
    Operator drift_generator(const CoefficientState& state) const;
    /// P_xw(t,t) = -i [A-B- coefficient of [L_w, Fbar_x]].
    BathMatrix diagonal_boundary(const CoefficientState& state) const;
    /// K(t) in dP(t,s')/dt = K(t) P(t,s').
    BathMatrix column_generator(const CoefficientState& state) const;

    /// Pieces of the two-time rules, linear in a lowering-coefficient vector.
    /// p_xw(t,s,t) = -i boundary_row(w) . f_x(t,s)
    const Eigen::RowVector4cd& boundary_row(int w) const { return boundary_rows_[w]; }
    /// A-B- coefficient of [L_y^dag A-B-, compose(f)] = source_row(y) . f
    const Eigen::RowVector4cd& source_row(int y) const { return source_rows_[y]; }
    /// project(-i L_y^dag A-B-)
    const Lowering& source_vector(int y) const { return source_vectors_[y]; }
    /// A-B- coefficient of [G, A-B-].
    static Complex pair_rate(const Operator& generator);

  private:
    Operator hamiltonian_;
    std::vector<BathChannel> channels_;
    std::vector<Operator> coupling_dag_;
    std::vector<Lowering> initial_;
    std::vector<Eigen::RowVector4cd> boundary_rows_;
    std::vector<Eigen::RowVector4cd> source_rows_;
    std::vector<Lowering> source_vectors_;
};

struct CoefficientOptions {
    /// Store the dense lower-triangular P(t_n, t_m) array.
    bool store_two_time = false;
    double blowup_guard = 1e6;
};

/// Coefficients on the fine grid (spacing dt/2) plus per-step propagators.
class OCoefficients {
  public:
    const TimeGrid& grid() const { return grid_; }
    int bath_count() const { return bath_count_; }

    /// Fine-grid accessors, k = 0..2*steps.
    const CoefficientState& state(std::size_t k) const { return states_[k]; }
    const Operator& drift_generator(std::size_t k) const { return drift_[k]; }
    const Operator& obar_deterministic(std::size_t k, int x) const {
        return obar_[k * static_cast<std::size_t>(bath_count_) + static_cast<std::size_t>(x)];
    }
    const BathMatrix& boundary(std::size_t k) const { return boundary_[k]; }
    const BathMatrix& column_generator(std::size_t k) const { return column_[k]; }

    /// F_{x,j}(t_n) on the coarse grid, j = 0..3.
    Complex F(int x, int j, std::size_t n) const { return states_[2 * n].F(x, j); }

    /// RK4 propagator of dP/dt = K P over coarse step n -> n+1.
    const BathMatrix& step_propagator(std::size_t n) const { return propagators_[n]; }

    bool has_two_time() const { return !two_time_.empty(); }
    /// P(t_n, t_m), m <= n.
    const BathMatrix& two_time(std::size_t n, std::size_t m) const;

  private:
    friend OCoefficients evolve_coefficients(const CoefficientSystem&, const TimeGrid&,
                                             const CoefficientOptions&);
    TimeGrid grid_;
    int bath_count_ = 0;
    std::vector<CoefficientState> states_;
    std::vector<Operator> drift_;
    std::vector<Operator> obar_;
    std::vector<BathMatrix> boundary_;
    std::vector<BathMatrix> column_;
    std::vector<BathMatrix> propagators_;
    std::vector<BathMatrix> two_time_;
};

/// Integrates (F, R) with RK4 at step dt/2. Throws NumericalError when any
/// coefficient magnitude exceeds options.blowup_guard.
OCoefficients evolve_coefficients(const CoefficientSystem& system, const TimeGrid& grid,
                                  const CoefficientOptions& options = {});

struct ObarOperator {
    Operator deterministic;
    Complex noise{0.0, 0.0};  // Z_x; the noise term is i Z_x A-B-

    Operator full() const { return deterministic + kI * noise * lowering::pair(); }
};

/// Obar_x(t_n) from the stored two-time P and a per-bath noise history on
/// the coarse grid (trapezoidal weights). Requires store_two_time.
std::vector<ObarOperator> assemble_obar(const OCoefficients& coeffs, std::size_t n,
                                        const std::vector<std::vector<Complex>>& history);

/// The same trapezoidal convolution, updated row by row with the step
/// propagators; needs only O(1) memory per step.
class StreamingConvolution {
  public:
    explicit StreamingConvolution(const OCoefficients& coeffs);

    /// Feeds the history value at the next coarse point and returns Z(t_n).
    const BathVector& push(const BathVector& z);
    std::size_t index() const { return next_; }

  private:
    const OCoefficients* coeffs_;
    BathVector sum_;
    BathVector last_;
    std::size_t next_ = 0;
};

/// O_x(t_n, s) for a set of source times s, driven by a given noise path.
struct TwoTimeTrace {
    std::vector<std::size_t> sources;  // coarse indices s_i
    /// operators[i][n - s_i][x]
    std::vector<std::vector<std::array<Operator, kMaxBaths>>> operators;
    /// p_columns[i][n - s_i] = P(t_n, s_i), element (y, x)
    std::vector<std::vector<BathMatrix>> p_columns;
    /// Z_x(t_n) of Obar driven by the probe noise, on the coarse grid.
    std::vector<BathVector> obar_noise;
};

TwoTimeTrace trace_two_time(const CoefficientSystem& system, const OCoefficients& coeffs,
                            const NoisePath& probe, std::vector<std::size_t> sources);

struct ResidualOptions {
    /// Upper bound on sampled (t, s) pairs; 0 checks the full grid.
    std::size_t max_pairs = 200;
};

/// Maximum operator-norm mismatch between a central difference of O_x(t,s)
/// and the right-hand side of the consistency condition, over sampled pairs
/// with s < t < T. Throws std::invalid_argument for grids with fewer than 5
/// points.
double consistency_residual(const CoefficientSystem& system, const OCoefficients& coeffs,
                            const NoisePath& probe, const ResidualOptions& options = {});

/// max_x ||O_x(s,s) - L_x|| over the same sampled sources; zero by construction.
double initial_condition_residual(const CoefficientSystem& system, const OCoefficients& coeffs,
                                  const NoisePath& probe);

}  // namespace nmqsd

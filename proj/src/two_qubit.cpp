#include "nmqsd/two_qubit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nmqsd {

namespace {

using Single = Eigen::Matrix2cd;

Operator kron(const Single& a, const Single& b) {
    Operator out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l)
                    out(2 * i + j, 2 * k + l) = a(i, k) * b(j, l);
    return out;
}

// Single-qubit matrices in the order |1>, |0>.
Single single_minus() {
    Single m = Single::Zero();
    m(1, 0) = 1.0;
    return m;
}
Single single_z() {
    Single m = Single::Zero();
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
    return m;
}
Single single_x() {
    Single m = Single::Zero();
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    return m;
}
Single single_y() {
    Single m = Single::Zero();
    m(0, 1) = -kI;
    m(1, 0) = kI;
    return m;
}

double wootters_combination(std::array<double, 4> lambdas) {
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
    return std::max(0.0, lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]);
}

}  // namespace

namespace ops {
Operator identity() { return Operator::Identity(); }
Operator sigma_minus_a() { return kron(single_minus(), Single::Identity()); }
Operator sigma_minus_b() { return kron(Single::Identity(), single_minus()); }
Operator sigma_z_a() { return kron(single_z(), Single::Identity()); }
Operator sigma_z_b() { return kron(Single::Identity(), single_z()); }
Operator sigma_x_a() { return kron(single_x(), Single::Identity()); }
Operator sigma_x_b() { return kron(Single::Identity(), single_x()); }
Operator sigma_y_a() { return kron(single_y(), Single::Identity()); }
Operator sigma_y_b() { return kron(Single::Identity(), single_y()); }
Operator commutator(const Operator& x, const Operator& y) { return x * y - y * x; }
}  // namespace ops

SystemOperators build_system(double omega_a, double omega_b, double kappa) {
    if (!std::isfinite(omega_a) || !std::isfinite(omega_b) || !std::isfinite(kappa))
        throw std::invalid_argument("build_system: parameters must be finite");
    SystemOperators sys;
    sys.hamiltonian = 0.5 * omega_a * ops::sigma_z_a() + 0.5 * omega_b * ops::sigma_z_b();
    sys.l_a = ops::sigma_minus_a() + kappa * ops::sigma_minus_b();
    sys.l_b = ops::sigma_minus_a() - kappa * ops::sigma_minus_b();
    return sys;
}

PureState::PureState(const Ket& amplitudes) {
    const double n = amplitudes.norm();
    if (!std::isfinite(n) || n <= 0.0)
        throw std::invalid_argument("PureState: amplitudes must be finite and nonzero");
    amplitudes_ = amplitudes / n;
}

PureState PureState::from_label(const std::string& label) {
    Ket v = Ket::Zero();
    if (label == "11") v(k11) = 1.0;
    else if (label == "10") v(k10) = 1.0;
    else if (label == "01") v(k01) = 1.0;
    else if (label == "00") v(k00) = 1.0;
    else if (label == "11+00") v(k11) = v(k00) = 1.0;
    else if (label == "10+01") v(k10) = v(k01) = 1.0;
    else if (label == "10-01") {
        v(k10) = 1.0;
        v(k01) = -1.0;
    } else {
        throw std::invalid_argument("unknown state label '" + label + "'");
    }
    return PureState(v);
}

DensityMatrix::DensityMatrix(const Operator& entries, double tolerance) : entries_(entries) {
    if (!entries.allFinite()) throw std::invalid_argument("DensityMatrix: non-finite entries");
    const double herm = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tolerance)
        throw std::invalid_argument("DensityMatrix: not Hermitian (deviation " +
                                    std::to_string(herm) + ")");
    const double tr = std::abs(entries.trace() - Complex(1.0));
    if (tr > tolerance)
        throw std::invalid_argument("DensityMatrix: trace deviates from 1 by " +
                                    std::to_string(tr));
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
    const Ket& v = psi.amplitudes();
    return DensityMatrix(v * v.adjoint());
}

DensityMatrix werner_state(double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("werner_state: Q must lie in [0, 1]");
    const Ket s = PureState::from_label("10+01").amplitudes();
    return DensityMatrix(0.25 * q * Operator::Identity() + (1.0 - q) * s * s.adjoint());
}

double concurrence(const DensityMatrix& rho) {
    // rho = W W^dag; the lambdas are the singular values of tau = W^T (Y x Y) W,
    // whose squares are the eigenvalues of sqrt(rho) R sqrt(rho). No square root
    // of a rounding-level eigenvalue is taken, so rank-deficient states stay exact.
    static const Operator yy = ops::sigma_y_a() * ops::sigma_y_b();
    const Operator herm = 0.5 * (rho.matrix() + rho.matrix().adjoint());
    Eigen::SelfAdjointEigenSolver<Operator> eig(herm);
    const Operator w = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const Operator tau = w.transpose() * yy * w;
    const Eigen::Vector4d sv = Eigen::JacobiSVD<Operator>(tau).singularValues();
    return std::min(1.0, wootters_combination({sv(0), sv(1), sv(2), sv(3)}));
}

double concurrence_nonhermitian(const DensityMatrix& rho) {
    // extended precision: sqrt of the product's eigenvalues amplifies their rounding
    using LC = std::complex<long double>;
    using LM = Eigen::Matrix<LC, 4, 4>;
    const LM r = rho.matrix().cast<LC>();
    const LM yy = (ops::sigma_y_a() * ops::sigma_y_b()).cast<LC>();
    const LM product = r * (yy * r.conjugate() * yy);
    Eigen::ComplexEigenSolver<LM> eig(product, false);
    std::array<double, 4> lambdas{};
    for (int i = 0; i < 4; ++i)
        lambdas[i] = static_cast<double>(std::sqrt(std::max(0.0L, eig.eigenvalues()(i).real())));
    return std::min(1.0, wootters_combination(lambdas));
}

double inner_correlation(const DensityMatrix& rho) {
    static const Operator xx = ops::sigma_x_a() * ops::sigma_x_b();
    return (rho.matrix() * xx).trace().real();
}

double population(const Operator& rho, const Ket& psi) {
    return psi.dot(rho * psi).real();
}

double trace_distance(const Operator& a, const Operator& b) {
    Operator d = a - b;
    d = 0.5 * (d + d.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Operator> eig(d, Eigen::EigenvaluesOnly);
    return 0.5 * eig.eigenvalues().cwiseAbs().sum();
}

DensityMatrix ensemble_average(std::span<const PureState> states, std::span<const double> weights) {
    if (states.empty()) throw std::invalid_argument("ensemble_average: empty state list");
    if (!weights.empty()) {
        if (weights.size() != states.size())
            throw std::invalid_argument("ensemble_average: weight count does not match states");
        if (std::any_of(weights.begin(), weights.end(), [](double w) { return !(w >= 0.0); }))
            throw std::invalid_argument("ensemble_average: negative weight");
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("ensemble_average: weights must sum to 1");
    }
    Operator sum = Operator::Zero();
    const double uniform = 1.0 / static_cast<double>(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const Ket& v = states[i].amplitudes();
        sum += (weights.empty() ? uniform : weights[i]) * (v * v.adjoint());
    }
    // Hermitian by construction; remove rounding asymmetry.
    sum = 0.5 * (sum + sum.adjoint()).eval();
    return DensityMatrix(sum);
}

void write_operator_block(std::ostream& out, const Operator& op) {
    char buf[64];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", op(r, c).real(), op(r, c).imag());
            out << buf << (c == 3 ? '\n' : ',');
        }
    }
}

Operator read_operator_block(std::istream& in) {
    Operator op;
    std::string line;
    for (int r = 0; r < 4; ++r) {
        if (!std::getline(in, line)) throw std::runtime_error("operator block: unexpected end of input");
        std::istringstream row(line);
        std::string cell;
        double values[8];
        for (double& v : values) {
            if (!std::getline(row, cell, ','))
                throw std::runtime_error("operator block: expected 8 columns");
            v = std::stod(cell);
        }
        for (int c = 0; c < 4; ++c) op(r, c) = Complex(values[2 * c], values[2 * c + 1]);
    }
    return op;
}

}  // namespace nmqsd

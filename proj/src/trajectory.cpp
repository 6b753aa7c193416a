#include "nmqsd/trajectory.hpp"

#include <cmath>
#include <sstream>

namespace nmqsd {

StageNoise stage_noise(const NoisePath& path, std::size_t step) {
    const int nb = static_cast<int>(path.baths.size());
    StageNoise s{BathVector(nb), BathVector(nb), BathVector(nb)};
    for (int x = 0; x < nb; ++x) {
        s.start(x) = path.baths[x][2 * step];
        s.mid(x) = path.baths[x][2 * step + 1];
        s.end(x) = path.baths[x][2 * step + 2];
    }
    return s;
}

TrajectoryIntegrator::TrajectoryIntegrator(const CoefficientSystem& system, const OCoefficients& coeffs)
    : system_(&system), coeffs_(&coeffs), nb_(system.bath_count()) {
    if (coeffs.bath_count() != nb_)
        throw std::invalid_argument("TrajectoryIntegrator: coefficients belong to a different system");
    minus_i_h_ = -kI * system.hamiltonian();
    for (const auto& ch : system.channels()) {
        coupling_.push_back(ch.coupling);
        coupling_dag_.push_back(ch.coupling.adjoint());
        dag_pair_.push_back(ch.coupling.adjoint() * lowering::pair());
    }
}

TrajectoryState TrajectoryIntegrator::initial_state(const Ket& psi0, const NoisePath* noise,
                                                    bool record_history) const {
    TrajectoryState s;
    s.psi = psi0;
    s.memory = BathVector::Zero(nb_);
    s.obar_noise = BathVector::Zero(nb_);
    s.record_history = record_history;
    if (record_history) {
        s.history.assign(static_cast<std::size_t>(nb_), {});
        // m(0) = 0, so shifted and raw noise agree at t = 0.
        for (int x = 0; x < nb_; ++x) s.history[x].push_back(noise ? noise->baths[x][0] : Complex(0.0));
    }
    return s;
}

TrajectoryIntegrator::LinearStage TrajectoryIntegrator::linear_rhs(std::size_t k, const LinearStage& s,
                                                                   const BathVector& z) const {
    LinearStage d{coeffs_->drift_generator(k) * s.psi, coeffs_->boundary(k) * z + coeffs_->column_generator(k) * s.zbar};
    for (int x = 0; x < nb_; ++x) d.psi += z(x) * (coupling_[x] * s.psi) - kI * s.zbar(x) * (dag_pair_[x] * s.psi);
    return d;
}

TrajectoryIntegrator::NonlinearStage TrajectoryIntegrator::nonlinear_rhs(std::size_t k, const NonlinearStage& s,
                                                                         const BathVector& z) const {
    const double norm2 = s.psi.squaredNorm();
    NonlinearStage d{minus_i_h_ * s.psi, BathVector(nb_), BathVector(nb_)};
    BathVector shifted = z + s.memory;
    for (int x = 0; x < nb_; ++x) {
        const Ket l_psi = coupling_[x] * s.psi;
        const Complex l_mean = s.psi.dot(l_psi) / norm2;  // <L_x>
        const Complex ldag_mean = std::conj(l_mean);      // <L_x^dag>
        const Ket o_psi = coeffs_->obar_deterministic(k, x) * s.psi + kI * s.zbar(x) * (lowering::pair() * s.psi);
        const Ket ldag_o_psi = coupling_dag_[x] * o_psi;
        const Complex centered_mean = (s.psi.dot(ldag_o_psi) - ldag_mean * s.psi.dot(o_psi)) / norm2;
        d.psi += shifted(x) * (l_psi - l_mean * s.psi) - (ldag_o_psi - ldag_mean * o_psi) + centered_mean * s.psi;
        const auto& kernel = system_->channels()[x].kernel;
        d.memory(x) = kernel.amplitude * ldag_mean - kernel.decay_rate * s.memory(x);
    }
    d.zbar = coeffs_->boundary(k) * shifted + coeffs_->column_generator(k) * s.zbar;
    return d;
}

namespace {

void check_norm(double norm, double time) {
    if (!std::isfinite(norm) || norm > TrajectoryIntegrator::kNormGuard ||
        norm < 1.0 / TrajectoryIntegrator::kNormGuard) {
        std::ostringstream msg;
        msg << "trajectory norm " << norm << " left the guard band at t = " << time;
        throw NumericalError(msg.str(), time);
    }
}

}  // namespace

void TrajectoryIntegrator::step_linear(TrajectoryState& state, const StageNoise& noise) const {
    const std::size_t n = state.t_index;
    if (n >= coeffs_->grid().steps) throw std::out_of_range("step_linear: end of grid reached");
    const double dt = coeffs_->grid().dt;
    const LinearStage y{state.psi, state.obar_noise};
    auto add = [](const LinearStage& a, double h, const LinearStage& b) {
        return LinearStage{a.psi + h * b.psi, a.zbar + h * b.zbar};
    };
    const LinearStage k1 = linear_rhs(2 * n, y, noise.start);
    const LinearStage k2 = linear_rhs(2 * n + 1, add(y, 0.5 * dt, k1), noise.mid);
    const LinearStage k3 = linear_rhs(2 * n + 1, add(y, 0.5 * dt, k2), noise.mid);
    const LinearStage k4 = linear_rhs(2 * n + 2, add(y, dt, k3), noise.end);
    state.psi += dt / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi);
    state.obar_noise += dt / 6.0 * (k1.zbar + 2.0 * k2.zbar + 2.0 * k3.zbar + k4.zbar);
    ++state.t_index;
    if (state.record_history)
        for (int x = 0; x < nb_; ++x) state.history[x].push_back(noise.end(x));
    check_norm(state.psi.norm(), coeffs_->grid().time(state.t_index));
}

void TrajectoryIntegrator::step_nonlinear(TrajectoryState& state, const StageNoise& noise) const {
    const std::size_t n = state.t_index;
    if (n >= coeffs_->grid().steps) throw std::out_of_range("step_nonlinear: end of grid reached");
    const double dt = coeffs_->grid().dt;
    const NonlinearStage y{state.psi, state.obar_noise, state.memory};
    auto add = [](const NonlinearStage& a, double h, const NonlinearStage& b) {
        return NonlinearStage{a.psi + h * b.psi, a.zbar + h * b.zbar, a.memory + h * b.memory};
    };
    const NonlinearStage k1 = nonlinear_rhs(2 * n, y, noise.start);
    const NonlinearStage k2 = nonlinear_rhs(2 * n + 1, add(y, 0.5 * dt, k1), noise.mid);
    const NonlinearStage k3 = nonlinear_rhs(2 * n + 1, add(y, 0.5 * dt, k2), noise.mid);
    const NonlinearStage k4 = nonlinear_rhs(2 * n + 2, add(y, dt, k3), noise.end);
    state.psi += dt / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi);
    state.obar_noise += dt / 6.0 * (k1.zbar + 2.0 * k2.zbar + 2.0 * k3.zbar + k4.zbar);
    state.memory += dt / 6.0 * (k1.memory + 2.0 * k2.memory + 2.0 * k3.memory + k4.memory);
    ++state.t_index;
    const double norm = state.psi.norm();
    check_norm(norm, coeffs_->grid().time(state.t_index));
    state.psi /= norm;
    if (state.record_history)
        for (int x = 0; x < nb_; ++x) state.history[x].push_back(noise.end(x) + state.memory(x));
}

}  // namespace nmqsd

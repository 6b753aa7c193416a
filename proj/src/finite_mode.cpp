#include "nmqsd/finite_mode.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nmqsd/errors.hpp"

namespace nmqsd {

double spectral_density(const ExponentialKernel& kernel, double omega) {
    const double g = kernel.decay_rate;
    return kernel.amplitude * g / (std::numbers::pi * (g * g + omega * omega));
}

Complex DiscretizedBath::correlation(double tau) const {
    Complex sum = 0.0;
    for (std::size_t j = 0; j < frequency.size(); ++j)
        sum += coupling[j] * coupling[j] * std::exp(-kI * frequency[j] * tau);
    return sum;
}

double DiscretizedBath::total_weight() const {
    double sum = 0.0;
    for (double g : coupling) sum += g * g;
    return sum;
}

double DiscretizedBath::recurrence_time() const { return 2.0 * std::numbers::pi / spacing; }

std::vector<DiscretizedBath> build_discretized_baths(const SimulationConfig& config, int modes,
                                                     double cutoff_multiple) {
    if (modes < 50) throw ConfigError("finite-mode oracle needs at least 50 modes per bath");
    if (!(cutoff_multiple >= 10.0)) throw ConfigError("frequency cutoff must be at least 10 times the bath rate");
    const BathModel model = build_bath_model(config);
    std::vector<DiscretizedBath> baths;
    for (const auto& ch : model.channels) {
        DiscretizedBath b;
        b.kernel = ch.kernel;
        b.cutoff = cutoff_multiple * ch.kernel.decay_rate;
        b.spacing = 2.0 * b.cutoff / modes;
        for (int j = 0; j < modes; ++j) {
            const double w = -b.cutoff + (j + 0.5) * b.spacing;
            b.frequency.push_back(w);
            b.coupling.push_back(std::sqrt(spectral_density(ch.kernel, w) * b.spacing));
        }
        baths.push_back(std::move(b));
    }
    return baths;
}

namespace {

int excitations(int s) { return s == k11 ? 2 : (s == k00 ? 0 : 1); }

int single_slot(int s) { return s == k10 ? 0 : (s == k01 ? 1 : 2); }

}  // namespace

Eigen::Index SectorHamiltonian::index(int s, int m, int n) const {
    const Eigen::Index k = static_cast<Eigen::Index>(modes_.size());
    if (m < 0) return s;
    if (n < 0) {
        if (excitations(s) > 1) return -1;
        return 4 + single_slot(s) * k + m;
    }
    if (s != k00) return -1;
    if (m > n) std::swap(m, n);
    return 4 + 3 * k + static_cast<Eigen::Index>(n) * (n + 1) / 2 + m;
}

SectorHamiltonian::SectorHamiltonian(const Operator& system_hamiltonian, const std::vector<Operator>& jumps,
                                     std::vector<BathMode> modes)
    : modes_(std::move(modes)) {
    const int k = static_cast<int>(modes_.size());
    for (const auto& m : modes_)
        if (m.channel < 0 || m.channel >= static_cast<int>(jumps.size()))
            throw std::invalid_argument("SectorHamiltonian: mode refers to a missing jump operator");
    for (const auto& l : jumps)
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if (std::abs(l(r, c)) > 0.0 && excitations(r) != excitations(c) - 1)
                    throw std::invalid_argument("SectorHamiltonian: jump operators must remove one excitation");
    dim_ = 4 + 3 * static_cast<Eigen::Index>(k) + static_cast<Eigen::Index>(k) * (k + 1) / 2;

    std::vector<Eigen::Triplet<Complex>> t;
    // Each environment configuration: (m, n) with -1 for empty slots.
    auto visit = [&](int m, int n) {
        const double bath_energy = (m >= 0 ? modes_[m].frequency : 0.0) + (n >= 0 ? modes_[n].frequency : 0.0);
        for (int s = 0; s < 4; ++s) {
            const Eigen::Index src = index(s, m, n);
            if (src < 0) continue;
            for (int r = 0; r < 4; ++r) {
                const Eigen::Index dst = index(r, m, n);
                if (dst < 0) continue;
                Complex v = system_hamiltonian(r, s);
                if (r == s) v += bath_energy;
                if (v != Complex(0.0)) t.emplace_back(dst, src, v);
            }
            if (n >= 0) continue;  // already two quanta in the bath
            for (int q = 0; q < k; ++q) {
                const double bose = (m == q) ? std::sqrt(2.0) : 1.0;
                const Operator& l = jumps[modes_[q].channel];
                for (int r = 0; r < 4; ++r) {
                    if (l(r, s) == Complex(0.0)) continue;
                    const Eigen::Index dst = m < 0 ? index(r, q) : index(r, m, q);
                    if (dst < 0) continue;
                    const Complex v = modes_[q].coupling * bose * l(r, s);
                    t.emplace_back(dst, src, v);
                    t.emplace_back(src, dst, std::conj(v));
                }
            }
        }
    };
    visit(-1, -1);
    for (int m = 0; m < k; ++m) visit(m, -1);
    for (int n = 0; n < k; ++n)
        for (int m = 0; m <= n; ++m) visit(m, n);

    h_.resize(dim_, dim_);
    h_.setFromTriplets(t.begin(), t.end());
    h_.makeCompressed();
    for (Eigen::Index r = 0; r < dim_; ++r) {
        double row = 0.0;
        for (Sparse::InnerIterator it(h_, r); it; ++it) row += std::abs(it.value());
        norm_bound_ = std::max(norm_bound_, row);
    }
}

Eigen::VectorXcd SectorHamiltonian::embed(const Ket& system_state) const {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim_);
    psi.head<4>() = system_state;
    return psi;
}

Operator SectorHamiltonian::reduce(const Eigen::VectorXcd& psi) const {
    const int k = mode_count();
    Ket v = psi.head<4>();
    Operator rho = v * v.adjoint();
    for (int m = 0; m < k; ++m) {
        v.setZero();
        for (int s : {int(k10), int(k01), int(k00)}) v(s) = psi(index(s, m));
        rho += v * v.adjoint();
    }
    const Eigen::Index pairs = dim_ - 4 - 3 * static_cast<Eigen::Index>(k);
    rho(k00, k00) += psi.tail(pairs).squaredNorm();
    return rho;
}

double SectorHamiltonian::excitation_number(const Eigen::VectorXcd& psi) const {
    const Eigen::Index k = mode_count();
    double n = 2.0 * std::norm(psi(k11)) + std::norm(psi(k10)) + std::norm(psi(k01));
    n += psi.segment(4, 2 * k).squaredNorm() * 2.0;  // one qubit + one mode
    n += psi.segment(4 + 2 * k, k).squaredNorm();
    n += psi.tail(dim_ - 4 - 3 * k).squaredNorm() * 2.0;
    return n;
}

LanczosPropagator::LanczosPropagator(const SectorHamiltonian::Sparse& h, int krylov_dim)
    : h_(&h), krylov_dim_(krylov_dim) {}

void LanczosPropagator::step(Eigen::VectorXcd& psi, double h) const {
    const double beta0 = psi.norm();
    if (beta0 == 0.0) return;
    const Eigen::Index dim = psi.size();
    const int mmax = static_cast<int>(std::min<Eigen::Index>(krylov_dim_, dim));
    Eigen::MatrixXcd v(dim, mmax);
    Eigen::VectorXd alpha(mmax), beta(mmax);
    v.col(0) = psi / beta0;
    int m = mmax;
    Eigen::VectorXcd w(dim);
    for (int j = 0; j < mmax; ++j) {
        w.noalias() = (*h_) * v.col(j);
        alpha(j) = v.col(j).dot(w).real();
        // full reorthogonalization, twice
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i <= j; ++i) w -= v.col(i).dot(w) * v.col(i);
        beta(j) = w.norm();
        if (j + 1 == mmax) break;
        if (beta(j) < 1e-14 * beta0) {
            m = j + 1;
            break;
        }
        v.col(j + 1) = w / beta(j);
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
        t(j, j) = alpha(j);
        if (j + 1 < m) t(j, j + 1) = t(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
    const Eigen::VectorXcd phase = (-kI * h * eig.eigenvalues().cast<Complex>()).array().exp();
    const Eigen::VectorXcd y =
        eig.eigenvectors().cast<Complex>() * phase.cwiseProduct(eig.eigenvectors().row(0).transpose().cast<Complex>());
    psi.noalias() = beta0 * (v.leftCols(m) * y);
}

FiniteModeResult run_finite_mode(const SimulationConfig& config, const FiniteModeOptions& options) {
    config.validate();
    const BathModel model = build_bath_model(config);
    const auto baths = build_discretized_baths(config, options.modes_per_bath, options.cutoff_multiple);
    for (const auto& b : baths) {
        if (config.t_final > 0.8 * b.recurrence_time()) {
            std::ostringstream msg;
            msg << "horizon T = " << config.t_final << " exceeds 80% of the bath recurrence time "
                << b.recurrence_time() << "; use more modes or a shorter T";
            throw ConfigError(msg.str());
        }
    }
    std::vector<Operator> jumps;
    std::vector<BathMode> modes;
    for (std::size_t x = 0; x < baths.size(); ++x) {
        jumps.push_back(model.channels[x].coupling);
        for (std::size_t j = 0; j < baths[x].frequency.size(); ++j)
            modes.push_back({baths[x].frequency[j], baths[x].coupling[j], static_cast<int>(x)});
    }
    const SectorHamiltonian ham(model.system.hamiltonian, jumps, std::move(modes));
    const LanczosPropagator prop(ham.matrix());

    const TimeGrid grid = config.grid();
    const std::size_t stride = config.stride_steps();
    const double interval = static_cast<double>(stride) * grid.dt;
    const int substeps = std::max(1, static_cast<int>(std::ceil(interval * ham.norm_bound() / 3.0)));
    const std::size_t outputs = grid.steps / stride + 1;

    FiniteModeResult result;
    for (std::size_t i = 0; i < outputs; ++i) {
        result.series.times.push_back(grid.time(i * stride));
        result.series.rho.push_back(Operator::Zero());
    }
    result.excitation_number.assign(outputs, 0.0);
    result.norm.assign(outputs, 0.0);

    for (const auto& [weight, state] : decompose_initial(config.initial)) {
        Eigen::VectorXcd psi = ham.embed(state.amplitudes());
        for (std::size_t i = 0; i < outputs; ++i) {
            if (i > 0)
                for (int s = 0; s < substeps; ++s) prop.step(psi, interval / substeps);
            result.series.rho[i] += weight * ham.reduce(psi);
            result.excitation_number[i] += weight * ham.excitation_number(psi);
            result.norm[i] += weight * psi.squaredNorm();
        }
    }
    for (auto& r : result.series.rho) r = 0.5 * (r + r.adjoint()).eval();
    return result;
}

}  // namespace nmqsd

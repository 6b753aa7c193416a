#include "nmqsd/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nmqsd {

namespace lowering {

const std::array<Operator, 4>& basis() {
    static const std::array<Operator, 4> b{
        ops::sigma_minus_a(),
        ops::sigma_minus_b(),
        Operator(ops::sigma_z_a() * ops::sigma_minus_b()),
        Operator(ops::sigma_z_b() * ops::sigma_minus_a()),
    };
    return b;
}

const Operator& pair() {
    static const Operator p = ops::sigma_minus_a() * ops::sigma_minus_b();
    return p;
}

Operator compose(const Lowering& f) {
    Operator x = Operator::Zero();
    x(k01, k11) = f(0) + f(3);
    x(k00, k10) = f(0) - f(3);
    x(k10, k11) = f(1) + f(2);
    x(k00, k01) = f(1) - f(2);
    return x;
}

Lowering project(const Operator& x) {
    Lowering f;
    f(0) = 0.5 * (x(k01, k11) + x(k00, k10));
    f(3) = 0.5 * (x(k01, k11) - x(k00, k10));
    f(1) = 0.5 * (x(k10, k11) + x(k00, k01));
    f(2) = 0.5 * (x(k10, k11) - x(k00, k01));
    return f;
}

Complex pair_coefficient(const Operator& x) { return x(k00, k11); }

double outside_span(const Operator& x) {
    return (x - compose(project(x)) - pair_coefficient(x) * pair()).norm();
}

}  // namespace lowering

namespace {

CoefficientState axpy(const CoefficientState& s, double h, const CoefficientState& d) {
    return {s.F + h * d.F, s.R + h * d.R};
}

double magnitude(const CoefficientState& s) {
    double m = 0.0;
    if (s.F.size() > 0) m = std::max(m, s.F.cwiseAbs().maxCoeff());
    if (s.R.size() > 0) m = std::max(m, s.R.cwiseAbs().maxCoeff());
    return m;
}

BathMatrix rk4_propagator(const BathMatrix& k0, const BathMatrix& km, const BathMatrix& k1, double h) {
    const auto nb = k0.rows();
    const BathMatrix id = BathMatrix::Identity(nb, nb);
    const BathMatrix x1 = k0;
    const BathMatrix x2 = km * (id + 0.5 * h * x1);
    const BathMatrix x3 = km * (id + 0.5 * h * x2);
    const BathMatrix x4 = k1 * (id + h * x3);
    return id + (h / 6.0) * (x1 + 2.0 * x2 + 2.0 * x3 + x4);
}

double operator_norm(const Operator& x) {
    Eigen::JacobiSVD<Operator> svd(x);
    return svd.singularValues()(0);
}

}  // namespace

CoefficientSystem::CoefficientSystem(const Operator& hamiltonian, std::vector<BathChannel> channels)
    : hamiltonian_(hamiltonian), channels_(std::move(channels)) {
    if (channels_.size() > static_cast<std::size_t>(kMaxBaths))
        throw std::invalid_argument("CoefficientSystem: at most two baths are supported");
    const auto& basis = lowering::basis();
    const Operator& pair = lowering::pair();
    for (const auto& ch : channels_) {
        if (!(ch.kernel.amplitude > 0.0) || !(ch.kernel.decay_rate > 0.0))
            throw std::invalid_argument("CoefficientSystem: kernel amplitude and rate must be positive");
        if (lowering::outside_span(ch.coupling) > 1e-14 ||
            std::abs(lowering::pair_coefficient(ch.coupling)) > 1e-14)
            throw std::invalid_argument("CoefficientSystem: coupling must be a single-lowering operator");
        const Operator dag = ch.coupling.adjoint();
        coupling_dag_.push_back(dag);
        initial_.push_back(lowering::project(ch.coupling));
        Eigen::RowVector4cd boundary, source;
        for (int j = 0; j < 4; ++j) {
            boundary(j) = lowering::pair_coefficient(ops::commutator(ch.coupling, basis[j]));
            source(j) = lowering::pair_coefficient(ops::commutator(Operator(dag * pair), basis[j]));
        }
        boundary_rows_.push_back(boundary);
        source_rows_.push_back(source);
        source_vectors_.push_back(lowering::project(Operator(-kI * dag * pair)));
    }
}

CoefficientState CoefficientSystem::zero_state() const {
    const int nb = bath_count();
    return {LoweringRows::Zero(nb, 4), BathMatrix::Zero(nb, nb)};
}

Operator CoefficientSystem::obar_deterministic(const CoefficientState& state, int x) const {
    return lowering::compose(state.F.row(x).transpose());
}

Operator CoefficientSystem::drift_generator(const CoefficientState& state) const {
    Operator g = -kI * hamiltonian_;
    for (int y = 0; y < bath_count(); ++y) g -= coupling_dag_[y] * obar_deterministic(state, y);
    return g;
}

Complex CoefficientSystem::pair_rate(const Operator& generator) {
    return lowering::pair_coefficient(ops::commutator(generator, lowering::pair()));
}

BathMatrix CoefficientSystem::diagonal_boundary(const CoefficientState& state) const {
    const int nb = bath_count();
    BathMatrix p(nb, nb);
    for (int x = 0; x < nb; ++x)
        for (int w = 0; w < nb; ++w)
            p(x, w) = -kI * (boundary_rows_[w] * state.F.row(x).transpose())(0);
    return p;
}

BathMatrix CoefficientSystem::column_generator(const CoefficientState& state) const {
    const int nb = bath_count();
    const Complex c = pair_rate(drift_generator(state));
    BathMatrix k(nb, nb);
    for (int x = 0; x < nb; ++x) {
        for (int y = 0; y < nb; ++y) {
            Complex d = 0.0;
            for (int j = 0; j < 4; ++j) d -= source_rows_[y](j) * state.F(x, j);
            k(x, y) = d + (x == y ? c - channels_[x].kernel.decay_rate : Complex(0.0));
        }
    }
    return k;
}

CoefficientState CoefficientSystem::derivative(const CoefficientState& state) const {
    const int nb = bath_count();
    CoefficientState d = zero_state();
    if (nb == 0) return d;
    const Operator g = drift_generator(state);
    const BathMatrix k = column_generator(state);
    const BathMatrix pd = diagonal_boundary(state);
    for (int x = 0; x < nb; ++x) {
        const auto& kern = channels_[x].kernel;
        Lowering df = kern.amplitude * initial_[x] - kern.decay_rate * state.F.row(x).transpose() +
                      lowering::project(ops::commutator(g, obar_deterministic(state, x)));
        for (int y = 0; y < nb; ++y) df += state.R(x, y) * source_vectors_[y];
        d.F.row(x) = df.transpose();
        for (int y = 0; y < nb; ++y) {
            Complex dr = kern.amplitude * pd(y, x) - kern.decay_rate * state.R(x, y);
            for (int u = 0; u < nb; ++u) dr += k(y, u) * state.R(x, u);
            d.R(x, y) = dr;
        }
    }
    return d;
}

const BathMatrix& OCoefficients::two_time(std::size_t n, std::size_t m) const {
    if (two_time_.empty()) throw std::logic_error("two-time P array was not stored");
    if (m > n || n > grid_.steps) throw std::out_of_range("two_time: need m <= n <= steps");
    return two_time_[n * (n + 1) / 2 + m];
}

OCoefficients evolve_coefficients(const CoefficientSystem& system, const TimeGrid& grid,
                                  const CoefficientOptions& options) {
    OCoefficients out;
    out.grid_ = grid;
    out.bath_count_ = system.bath_count();
    const std::size_t fine = grid.fine_count();
    const double h = 0.5 * grid.dt;
    const int nb = system.bath_count();

    out.states_.reserve(fine);
    out.states_.push_back(system.zero_state());
    for (std::size_t k = 0; k + 1 < fine; ++k) {
        const CoefficientState& s = out.states_.back();
        const CoefficientState k1 = system.derivative(s);
        const CoefficientState k2 = system.derivative(axpy(s, 0.5 * h, k1));
        const CoefficientState k3 = system.derivative(axpy(s, 0.5 * h, k2));
        const CoefficientState k4 = system.derivative(axpy(s, h, k3));
        CoefficientState next{s.F + (h / 6.0) * (k1.F + 2.0 * k2.F + 2.0 * k3.F + k4.F),
                              s.R + (h / 6.0) * (k1.R + 2.0 * k2.R + 2.0 * k3.R + k4.R)};
        const double m = magnitude(next);
        if (!std::isfinite(m) || m > options.blowup_guard) {
            std::ostringstream msg;
            msg << "O-coefficients exceeded guard " << options.blowup_guard << " at t = "
                << grid.fine_time(k + 1);
            throw NumericalError(msg.str(), grid.fine_time(k + 1));
        }
        out.states_.push_back(std::move(next));
    }

    out.drift_.reserve(fine);
    out.obar_.reserve(fine * static_cast<std::size_t>(nb));
    out.boundary_.reserve(fine);
    out.column_.reserve(fine);
    for (const auto& s : out.states_) {
        out.drift_.push_back(system.drift_generator(s));
        for (int x = 0; x < nb; ++x) out.obar_.push_back(system.obar_deterministic(s, x));
        out.boundary_.push_back(system.diagonal_boundary(s));
        out.column_.push_back(system.column_generator(s));
    }

    out.propagators_.reserve(grid.steps);
    for (std::size_t n = 0; n < grid.steps; ++n)
        out.propagators_.push_back(
            rk4_propagator(out.column_[2 * n], out.column_[2 * n + 1], out.column_[2 * n + 2], grid.dt));

    if (options.store_two_time) {
        const std::size_t rows = grid.steps + 1;
        out.two_time_.resize(rows * (rows + 1) / 2);
        out.two_time_[0] = out.boundary_[0];
        for (std::size_t n = 0; n < grid.steps; ++n) {
            const std::size_t src = n * (n + 1) / 2;
            const std::size_t dst = (n + 1) * (n + 2) / 2;
            for (std::size_t m = 0; m <= n; ++m) {
                out.two_time_[dst + m] = out.propagators_[n] * out.two_time_[src + m];
                if (nb > 0 && out.two_time_[dst + m].cwiseAbs().maxCoeff() > options.blowup_guard)
                    throw NumericalError("two-time P exceeded guard", grid.time(n + 1));
            }
            out.two_time_[dst + n + 1] = out.boundary_[2 * (n + 1)];
        }
    }
    return out;
}

std::vector<ObarOperator> assemble_obar(const OCoefficients& coeffs, std::size_t n,
                                        const std::vector<std::vector<Complex>>& history) {
    if (!coeffs.has_two_time()) throw std::logic_error("assemble_obar: two-time P array not stored");
    const int nb = coeffs.bath_count();
    if (n > coeffs.grid().steps) throw std::out_of_range("assemble_obar: time index beyond grid");
    if (history.size() != static_cast<std::size_t>(nb))
        throw std::invalid_argument("assemble_obar: history missing for some bath");
    for (const auto& h : history)
        if (h.size() < n + 1) throw std::invalid_argument("assemble_obar: missing noise history");

    const double dt = coeffs.grid().dt;
    std::vector<ObarOperator> out(static_cast<std::size_t>(nb));
    for (int x = 0; x < nb; ++x) {
        out[x].deterministic = coeffs.obar_deterministic(2 * n, x);
        Complex z = 0.0;
        for (std::size_t m = 0; n > 0 && m <= n; ++m) {
            const double w = (m == 0 || m == n) ? 0.5 * dt : dt;
            const BathMatrix& p = coeffs.two_time(n, m);
            for (int y = 0; y < nb; ++y) z += w * p(x, y) * history[y][m];
        }
        out[x].noise = z;
    }
    return out;
}

StreamingConvolution::StreamingConvolution(const OCoefficients& coeffs)
    : coeffs_(&coeffs),
      sum_(BathVector::Zero(coeffs.bath_count())),
      last_(BathVector::Zero(coeffs.bath_count())) {}

const BathVector& StreamingConvolution::push(const BathVector& z) {
    if (next_ > coeffs_->grid().steps) throw std::out_of_range("StreamingConvolution: past end of grid");
    if (next_ > 0) {
        const std::size_t n = next_ - 1;
        const double half = 0.5 * coeffs_->grid().dt;
        sum_ = coeffs_->step_propagator(n) * (sum_ + half * coeffs_->boundary(2 * n) * last_) +
               half * coeffs_->boundary(2 * n + 2) * z;
    }
    last_ = z;
    ++next_;
    return sum_;
}

namespace {

struct SourceState {
    LoweringRows f;
    BathMatrix p;
    BathVector z;
};

struct TraceState {
    BathVector zbar;
    std::vector<SourceState> sources;
};

TraceState trace_axpy(const TraceState& s, double h, const TraceState& d) {
    TraceState out{s.zbar + h * d.zbar, {}};
    out.sources.reserve(s.sources.size());
    for (std::size_t i = 0; i < s.sources.size(); ++i)
        out.sources.push_back({s.sources[i].f + h * d.sources[i].f, s.sources[i].p + h * d.sources[i].p,
                               s.sources[i].z + h * d.sources[i].z});
    return out;
}

TraceState trace_derivative(const CoefficientSystem& system, const OCoefficients& coeffs,
                            const NoisePath& probe, std::size_t k, const TraceState& s) {
    const int nb = system.bath_count();
    BathVector z(nb);
    for (int w = 0; w < nb; ++w) z(w) = probe.baths[w][k];
    const Operator& g = coeffs.drift_generator(k);
    const BathMatrix& kgen = coeffs.column_generator(k);
    const Complex c = CoefficientSystem::pair_rate(g);

    TraceState d{coeffs.boundary(k) * z + kgen * s.zbar, {}};
    d.sources.reserve(s.sources.size());
    for (const auto& src : s.sources) {
        SourceState ds{LoweringRows(nb, 4), kgen * src.p, BathVector(nb)};
        for (int x = 0; x < nb; ++x) {
            const Lowering fx = src.f.row(x).transpose();
            Lowering df = lowering::project(ops::commutator(g, lowering::compose(fx)));
            for (int y = 0; y < nb; ++y) df += src.p(y, x) * system.source_vector(y);
            ds.f.row(x) = df.transpose();
            Complex dz = c * src.z(x);
            for (int w = 0; w < nb; ++w) {
                dz += -kI * (system.boundary_row(w) * fx)(0) * z(w);
                dz -= (system.source_row(w) * fx)(0) * s.zbar(w);
            }
            ds.z(x) = dz;
        }
        d.sources.push_back(std::move(ds));
    }
    return d;
}

std::vector<std::size_t> sample_indices(std::size_t lo, std::size_t hi, std::size_t count) {
    // Up to `count` indices spread uniformly over [lo, hi].
    std::set<std::size_t> picked;
    if (hi < lo) return {};
    const std::size_t span = hi - lo;
    if (count == 0 || count > span) {
        for (std::size_t i = lo; i <= hi; ++i) picked.insert(i);
    } else if (count == 1) {
        picked.insert(lo + span / 2);
    } else {
        for (std::size_t i = 0; i < count; ++i)
            picked.insert(lo + static_cast<std::size_t>(std::llround(static_cast<double>(i) *
                                                                     static_cast<double>(span) /
                                                                     static_cast<double>(count - 1))));
    }
    return {picked.begin(), picked.end()};
}

}  // namespace

TwoTimeTrace trace_two_time(const CoefficientSystem& system, const OCoefficients& coeffs,
                            const NoisePath& probe, std::vector<std::size_t> sources) {
    const int nb = system.bath_count();
    const TimeGrid& grid = coeffs.grid();
    if (probe.baths.size() != static_cast<std::size_t>(nb))
        throw std::invalid_argument("trace_two_time: probe noise must cover every bath");
    for (const auto& b : probe.baths)
        if (b.size() < grid.fine_count())
            throw std::invalid_argument("trace_two_time: probe noise shorter than the grid");
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    if (!sources.empty() && sources.back() > grid.steps)
        throw std::out_of_range("trace_two_time: source beyond grid");

    TwoTimeTrace out;
    out.sources = sources;
    out.operators.resize(sources.size());
    out.p_columns.resize(sources.size());
    out.obar_noise.reserve(grid.steps + 1);

    TraceState state{BathVector::Zero(nb), {}};
    std::size_t next_source = 0;
    const double dt = grid.dt;
    auto record = [&](std::size_t n) {
        out.obar_noise.push_back(state.zbar);
        for (std::size_t i = 0; i < state.sources.size(); ++i) {
            std::array<Operator, kMaxBaths> o{};
            for (int x = 0; x < nb; ++x)
                o[x] = lowering::compose(state.sources[i].f.row(x).transpose()) +
                       kI * state.sources[i].z(x) * lowering::pair();
            out.operators[i].push_back(o);
            out.p_columns[i].push_back(state.sources[i].p);
        }
        (void)n;
    };

    for (std::size_t n = 0; n <= grid.steps; ++n) {
        while (next_source < sources.size() && sources[next_source] == n) {
            SourceState src{LoweringRows(nb, 4), coeffs.boundary(2 * n), BathVector::Zero(nb)};
            for (int x = 0; x < nb; ++x) src.f.row(x) = system.initial_coefficients(x).transpose();
            state.sources.push_back(std::move(src));
            ++next_source;
        }
        record(n);
        if (n == grid.steps) break;
        const TraceState k1 = trace_derivative(system, coeffs, probe, 2 * n, state);
        const TraceState k2 = trace_derivative(system, coeffs, probe, 2 * n + 1, trace_axpy(state, 0.5 * dt, k1));
        const TraceState k3 = trace_derivative(system, coeffs, probe, 2 * n + 1, trace_axpy(state, 0.5 * dt, k2));
        const TraceState k4 = trace_derivative(system, coeffs, probe, 2 * n + 2, trace_axpy(state, dt, k3));
        TraceState next = trace_axpy(state, dt / 6.0, k1);
        next = trace_axpy(next, dt / 3.0, k2);
        next = trace_axpy(next, dt / 3.0, k3);
        state = trace_axpy(next, dt / 6.0, k4);
    }
    return out;
}

double consistency_residual(const CoefficientSystem& system, const OCoefficients& coeffs,
                            const NoisePath& probe, const ResidualOptions& options) {
    const TimeGrid& grid = coeffs.grid();
    if (grid.steps + 1 < 5)
        throw std::invalid_argument("consistency_residual: grid too coarse for the difference stencil");
    const int nb = system.bath_count();
    if (nb == 0) return 0.0;

    const std::size_t last_source = grid.steps - 2;
    std::size_t source_count = 0;
    std::size_t per_source = 0;
    if (options.max_pairs > 0) {
        source_count = std::max<std::size_t>(
            1, std::min<std::size_t>(last_source + 1,
                                     static_cast<std::size_t>(std::sqrt(static_cast<double>(options.max_pairs)))));
        per_source = std::max<std::size_t>(1, options.max_pairs / source_count);
    }
    const std::vector<std::size_t> sources = sample_indices(0, last_source, source_count);
    const TwoTimeTrace trace = trace_two_time(system, coeffs, probe, sources);

    const Operator& pair = lowering::pair();
    double worst = 0.0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const std::size_t s = sources[i];
        for (std::size_t n : sample_indices(s + 1, grid.steps - 1, per_source)) {
            Operator drive = -kI * system.hamiltonian();
            for (int y = 0; y < nb; ++y) {
                const auto& ch = system.channels()[y];
                const Operator obar = coeffs.obar_deterministic(2 * n, y) + kI * trace.obar_noise[n](y) * pair;
                drive += ch.coupling * probe.baths[y][2 * n] - ch.coupling.adjoint() * obar;
            }
            for (int x = 0; x < nb; ++x) {
                const Operator& o = trace.operators[i][n - s][x];
                Operator rhs = ops::commutator(drive, o);
                for (int y = 0; y < nb; ++y)
                    rhs -= system.channels()[y].coupling.adjoint() *
                           (kI * trace.p_columns[i][n - s](y, x) * pair);
                const Operator lhs =
                    (trace.operators[i][n + 1 - s][x] - trace.operators[i][n - 1 - s][x]) / (2.0 * grid.dt);
                worst = std::max(worst, operator_norm(lhs - rhs));
            }
        }
    }
    return worst;
}

double initial_condition_residual(const CoefficientSystem& system, const OCoefficients& coeffs,
                                  const NoisePath& probe) {
    const TimeGrid& grid = coeffs.grid();
    std::vector<std::size_t> sources = sample_indices(0, grid.steps, 10);
    const TwoTimeTrace trace = trace_two_time(system, coeffs, probe, sources);
    double worst = 0.0;
    for (std::size_t i = 0; i < trace.sources.size(); ++i)
        for (int x = 0; x < system.bath_count(); ++x)
            worst = std::max(worst, operator_norm(trace.operators[i][0][x] - system.channels()[x].coupling));
    return worst;
}

}  // namespace nmqsd

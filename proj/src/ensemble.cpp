// Ensemble driver: trajectories are grouped into a fixed set of blocks per
// spectral component of the initial state. Each block is reduced by a
// pairwise tree over its trajectories and blocks are combined by a second
// tree, so the summation order depends only on n_traj. Blocks also serve as
// jackknife groups for the concurrence error bar.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "nmqsd/errors.hpp"
#include "nmqsd/trajectory.hpp"

namespace nmqsd {

namespace {

constexpr std::size_t kBlocks = 32;
constexpr int kLinearObservables = 2;  // inner correlation, ground population

struct Moments {
    Operator rho = Operator::Zero();
    double count = 0.0;
    double w = 0.0;
    double w2 = 0.0;
    std::array<double, kLinearObservables> wc{};
    std::array<double, kLinearObservables> w2c{};
    std::array<double, kLinearObservables> w2c2{};

    Moments& operator+=(const Moments& o) {
        rho += o.rho;
        count += o.count;
        w += o.w;
        w2 += o.w2;
        for (int i = 0; i < kLinearObservables; ++i) {
            wc[i] += o.wc[i];
            w2c[i] += o.w2c[i];
            w2c2[i] += o.w2c2[i];
        }
        return *this;
    }
};

using Row = std::vector<Moments>;

void accumulate(Row& into, const Row& from) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

struct BlockOutcome {
    Row row;
    std::size_t failures = 0;
    std::size_t first_failed = 0;
    std::string first_error;
};

struct WorkItem {
    std::size_t component;
    std::size_t block;
    std::size_t begin;  // global trajectory indices [begin, end)
    std::size_t end;
};

class EnsembleRunner {
  public:
    EnsembleRunner(const SimulationConfig& config, const CoefficientSystem& system, const OCoefficients& coeffs)
        : config_(config), integrator_(system, coeffs), grid_(coeffs.grid()), stride_(config.stride_steps()) {
        for (const auto& ch : system.channels()) kernels_.push_back(ch.kernel);
        for (std::size_t n = 0; n <= grid_.steps; n += stride_) outputs_.push_back(n);
        xx_ = ops::sigma_x_a() * ops::sigma_x_b();
    }

    std::size_t output_count() const { return outputs_.size(); }
    const std::vector<std::size_t>& outputs() const { return outputs_; }

    Row trajectory(const Ket& psi0, std::size_t index) const {
        const NoisePath noise = sample_noise_path(kernels_, grid_, config_.seed, index, config_.refine_levels);
        TrajectoryState state = integrator_.initial_state(psi0);
        Row row(outputs_.size());
        std::size_t next_out = 0;
        for (std::size_t n = 0;; ++n) {
            if (next_out < outputs_.size() && outputs_[next_out] == n) record(row[next_out++], state.psi);
            if (n == grid_.steps) break;
            const StageNoise stage = stage_noise(noise, n);
            if (config_.mode == QsdMode::linear) integrator_.step_linear(state, stage);
            else integrator_.step_nonlinear(state, stage);
        }
        return row;
    }

    BlockOutcome reduce(const Ket& psi0, std::size_t begin, std::size_t end) const {
        BlockOutcome out;
        if (end - begin == 1) {
            try {
                out.row = trajectory(psi0, begin);
            } catch (const NumericalError& e) {
                out.row.assign(outputs_.size(), Moments{});
                out.failures = 1;
                out.first_failed = begin;
                out.first_error = e.what();
            }
            return out;
        }
        const std::size_t mid = begin + (end - begin) / 2;
        out = reduce(psi0, begin, mid);
        BlockOutcome right = reduce(psi0, mid, end);
        accumulate(out.row, right.row);
        if (out.failures == 0 && right.failures > 0) {
            out.first_failed = right.first_failed;
            out.first_error = right.first_error;
        }
        out.failures += right.failures;
        return out;
    }

  private:
    void record(Moments& m, const Ket& psi) const {
        const double norm2 = psi.squaredNorm();
        const double weight = config_.mode == QsdMode::linear ? norm2 : 1.0;
        const double scale = weight / norm2;
        m.rho = scale * (psi * psi.adjoint());
        m.count = 1.0;
        m.w = weight;
        m.w2 = weight * weight;
        const std::array<double, kLinearObservables> c{psi.dot(xx_ * psi).real() / norm2,
                                                       std::norm(psi(k00)) / norm2};
        for (int i = 0; i < kLinearObservables; ++i) {
            m.wc[i] = weight * c[i];
            m.w2c[i] = weight * weight * c[i];
            m.w2c2[i] = weight * weight * c[i] * c[i];
        }
    }

    const SimulationConfig& config_;
    TrajectoryIntegrator integrator_;
    TimeGrid grid_;
    std::size_t stride_;
    std::vector<ExponentialKernel> kernels_;
    std::vector<std::size_t> outputs_;
    Operator xx_;
};

Row tree_sum(std::vector<Row>& rows, std::size_t begin, std::size_t end) {
    if (end - begin == 1) return rows[begin];
    const std::size_t mid = begin + (end - begin) / 2;
    Row left = tree_sum(rows, begin, mid);
    accumulate(left, tree_sum(rows, mid, end));
    return left;
}

Operator component_rho(const Moments& m) { return m.w > 0.0 ? Operator(m.rho / m.w) : Operator::Zero(); }

}  // namespace

EnsembleResult run_ensemble(const SimulationConfig& config) {
    config.validate();
    const BathModel model = build_bath_model(config);
    const CoefficientSystem system(model.system.hamiltonian, model.channels);
    const OCoefficients coeffs = evolve_coefficients(system, config.grid());
    return run_ensemble(config, system, coeffs);
}

EnsembleResult run_ensemble(const SimulationConfig& config, const CoefficientSystem& system,
                            const OCoefficients& coeffs) {
    config.validate();
    const auto components = decompose_initial(config.initial);
    std::vector<double> weights;
    for (const auto& c : components) weights.push_back(c.first);
    const std::vector<std::size_t> counts = apportion(weights, config.n_traj);

    EnsembleRunner runner(config, system, coeffs);
    const std::size_t n_out = runner.output_count();

    std::vector<WorkItem> work;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < components.size(); ++k) {
        for (std::size_t b = 0; b < kBlocks; ++b) {
            const std::size_t lo = offset + b * counts[k] / kBlocks;
            const std::size_t hi = offset + (b + 1) * counts[k] / kBlocks;
            work.push_back({k, b, lo, hi});
        }
        offset += counts[k];
    }

    std::vector<BlockOutcome> outcomes(work.size());
    std::vector<std::size_t> completion;
    std::mutex completion_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            const WorkItem& item = work[i];
            if (item.begin == item.end) outcomes[i].row.assign(n_out, Moments{});
            else outcomes[i] = runner.reduce(components[item.component].second.amplitudes(), item.begin, item.end);
            std::lock_guard lock(completion_mutex);
            completion.push_back(i);
        }
    };
    unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, work.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    EnsembleResult result;
    result.trajectories = config.n_traj;
    std::size_t first_failed = 0;
    std::string first_error;
    for (const auto& o : outcomes) {
        if (o.failures > 0 && result.failures == 0) {
            first_failed = o.first_failed;
            first_error = o.first_error;
        }
        result.failures += o.failures;
    }
    if (result.failures > config.failure_budget)
        throw NumericalError("trajectory " + std::to_string(first_failed) + ": " + first_error + " (" +
                                 std::to_string(result.failures) + " failed, budget " +
                                 std::to_string(config.failure_budget) + ")",
                             0.0);

    // Per-component totals.
    std::vector<Row> totals(components.size());
    for (std::size_t k = 0; k < components.size(); ++k) {
        if (config.deterministic_reduction) {
            std::vector<Row> rows;
            for (std::size_t b = 0; b < kBlocks; ++b) rows.push_back(outcomes[k * kBlocks + b].row);
            totals[k] = tree_sum(rows, 0, rows.size());
        } else {
            totals[k].assign(n_out, Moments{});
            for (std::size_t i : completion)
                if (work[i].component == k) accumulate(totals[k], outcomes[i].row);
        }
        if (totals[k].front().count == 0.0)
            throw NumericalError("every trajectory of an initial-state component failed", 0.0);
    }

    const Ket ground = PureState::from_label("00").amplitudes();
    auto& obs = result.observables;
    for (std::size_t i = 0; i < n_out; ++i) {
        const double t = coeffs.grid().time(runner.outputs()[i]);
        Operator rho = Operator::Zero();
        std::array<double, kLinearObservables> mean{}, var{};
        double norm2 = 0.0;
        for (std::size_t k = 0; k < components.size(); ++k) {
            const Moments& m = totals[k][i];
            const double lam = components[k].first;
            rho += lam * component_rho(m);
            norm2 += lam * m.w / m.count;
            for (int o = 0; o < kLinearObservables; ++o) {
                const double c = m.wc[o] / m.w;
                mean[o] += lam * c;
                var[o] += lam * lam * (m.w2c2[o] - 2.0 * c * m.w2c[o] + c * c * m.w2) / (m.w * m.w);
            }
        }
        rho = 0.5 * (rho + rho.adjoint()).eval();
        result.series.times.push_back(t);
        result.series.rho.push_back(rho);
        result.mean_norm2.push_back(norm2);
        obs.times.push_back(t);
        obs.inner_correlation.push_back(mean[0]);
        obs.inner_correlation_stderr.push_back(std::sqrt(std::max(0.0, var[0])));
        obs.ground_population.push_back(population(rho, ground));
        obs.concurrence.push_back(concurrence(DensityMatrix(rho, 1e-6)));

        // Leave-one-block-out jackknife.
        std::vector<double> loo;
        for (std::size_t b = 0; b < kBlocks; ++b) {
            bool empty = true;
            Operator r = Operator::Zero();
            for (std::size_t k = 0; k < components.size(); ++k) {
                const Moments& total = totals[k][i];
                const Moments& block = outcomes[k * kBlocks + b].row[i];
                if (block.count > 0.0) empty = false;
                const double w = total.w - block.w;
                r += components[k].first * (w > 0.0 ? Operator((total.rho - block.rho) / w) : component_rho(total));
            }
            if (empty) continue;
            r = 0.5 * (r + r.adjoint()).eval();
            loo.push_back(concurrence(DensityMatrix(r, 1e-6)));
        }
        double se = 0.0;
        if (loo.size() > 1) {
            double avg = 0.0;
            for (double v : loo) avg += v;
            avg /= static_cast<double>(loo.size());
            for (double v : loo) se += (v - avg) * (v - avg);
            se = std::sqrt(se * static_cast<double>(loo.size() - 1) / static_cast<double>(loo.size()));
        }
        obs.concurrence_stderr.push_back(se);
    }
    return result;
}

}  // namespace nmqsd

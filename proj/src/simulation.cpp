#include "nmqsd/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nmqsd/errors.hpp"

namespace nmqsd {

void SimulationConfig::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(omega_a) || !finite(omega_b) || !finite(kappa))
        throw ConfigError("omega_a, omega_b and kappa must be finite");
    if (!finite(lambda) || std::abs(lambda) > 1.0)
        throw ConfigError("|lambda| > 1 is rejected: the model may become unphysical and lose its positivity");
    if (!finite(coupling) || coupling < 0.0) throw ConfigError("Gamma must be a nonnegative number");
    if (!finite(bandwidth) || !(bandwidth > 0.0)) throw ConfigError("gamma must be positive");
    if (!finite(dt) || !(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!finite(t_final) || !(t_final >= dt)) throw ConfigError("T must be at least dt");
    if (!finite(output_stride) || !(output_stride > 0.0)) throw ConfigError("output_stride must be positive");
    if (n_traj < 1) throw ConfigError("n_traj must be at least 1");
    if (refine_levels < 0 || refine_levels > 20) throw ConfigError("refine_levels must lie in [0, 20]");
}

std::size_t SimulationConfig::stride_steps() const {
    return static_cast<std::size_t>(std::max<long long>(1, std::llround(output_stride / dt)));
}

std::vector<ExponentialKernel> BathModel::kernels() const {
    std::vector<ExponentialKernel> k;
    for (const auto& ch : channels) k.push_back(ch.kernel);
    return k;
}

BathModel build_bath_model(const SimulationConfig& config) {
    config.validate();
    BathModel model;
    model.system = build_system(config.omega_a, config.omega_b, config.kappa);
    if (config.coupling == 0.0) return model;
    const KernelPair kernels = make_kernels(config.coupling, config.bandwidth, config.lambda);
    if (!kernels.b) {
        // lambda = -1 is the common bath of L_b; make_kernels still calls it "a".
        model.channels.push_back({kernels.a, config.lambda > 0 ? model.system.l_a : model.system.l_b});
        return model;
    }
    model.channels.push_back({kernels.a, model.system.l_a});
    model.channels.push_back({*kernels.b, model.system.l_b});
    return model;
}

std::vector<std::pair<double, PureState>> decompose_initial(const InitialState& initial) {
    if (const auto* psi = std::get_if<PureState>(&initial)) return {{1.0, *psi}};
    const Operator& rho = std::get<DensityMatrix>(initial).matrix();
    Eigen::SelfAdjointEigenSolver<Operator> eig(0.5 * (rho + rho.adjoint()));
    std::vector<std::pair<double, PureState>> parts;
    for (int i = 3; i >= 0; --i) {
        const double w = eig.eigenvalues()(i);
        if (w > 1e-12) parts.emplace_back(w, PureState(eig.eigenvectors().col(i)));
    }
    double total = 0.0;
    for (const auto& p : parts) total += p.first;
    for (auto& p : parts) p.first /= total;
    return parts;
}

std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = weights[i] / sum * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned)
        ++counts[remainders[i].second];
    return counts;
}

ObservableTable ObservableTable::from_series(const DensitySeries& series) {
    ObservableTable t;
    t.times = series.times;
    const Ket ground = PureState::from_label("00").amplitudes();
    for (const auto& rho : series.rho) {
        const DensityMatrix dm(0.5 * (rho + rho.adjoint()), 1e-6);
        t.inner_correlation.push_back(nmqsd::inner_correlation(dm));
        t.inner_correlation_stderr.push_back(0.0);
        t.concurrence.push_back(nmqsd::concurrence(dm));
        t.concurrence_stderr.push_back(0.0);
        t.ground_population.push_back(population(rho, ground));
    }
    return t;
}

}  // namespace nmqsd

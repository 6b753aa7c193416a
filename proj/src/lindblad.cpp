#include "nmqsd/lindblad.hpp"

#include <cmath>
#include <sstream>

#include "nmqsd/errors.hpp"

namespace nmqsd {

LindbladGenerator::LindbladGenerator(Operator hamiltonian, std::vector<LindbladChannel> channels)
    : hamiltonian_(std::move(hamiltonian)), channels_(std::move(channels)), anticommutator_(Operator::Zero()) {
    for (const auto& ch : channels_) {
        if (!std::isfinite(ch.rate) || ch.rate < 0.0)
            throw std::invalid_argument("Lindblad rates must be finite and nonnegative");
        anticommutator_ += ch.rate * ch.jump.adjoint() * ch.jump;
    }
}

LindbladGenerator LindbladGenerator::markov_limit(const SimulationConfig& config) {
    config.validate();
    const double lambda = std::abs(config.lambda);
    if (lambda > 1.0 - 1e-6 && lambda < 1.0) {
        std::ostringstream msg;
        msg << "lambda = " << config.lambda
            << " is too close to 1: the second Markov rate diverges; use |lambda| = 1 or a smaller value";
        throw ConfigError(msg.str());
    }
    const SystemOperators sys = build_system(config.omega_a, config.omega_b, config.kappa);
    std::vector<LindbladChannel> ch;
    if (config.coupling > 0.0) {
        if (lambda == 1.0) {
            ch.push_back({config.lambda > 0 ? sys.l_a : sys.l_b, config.coupling / 2.0});
        } else {
            ch.push_back({sys.l_a, config.coupling / (1.0 + config.lambda)});
            ch.push_back({sys.l_b, config.coupling / (1.0 - config.lambda)});
        }
    }
    return LindbladGenerator(sys.hamiltonian, std::move(ch));
}

Operator LindbladGenerator::apply(const Operator& rho) const {
    Operator out = -kI * (hamiltonian_ * rho - rho * hamiltonian_) - 0.5 * (anticommutator_ * rho + rho * anticommutator_);
    for (const auto& ch : channels_) out += ch.rate * ch.jump * rho * ch.jump.adjoint();
    return out;
}

DensitySeries run_lindblad(const SimulationConfig& config) {
    return run_lindblad(config, LindbladGenerator::markov_limit(config));
}

DensitySeries run_lindblad(const SimulationConfig& config, const LindbladGenerator& generator) {
    config.validate();
    const TimeGrid grid = config.grid();
    const std::size_t stride = config.stride_steps();
    Operator rho = std::holds_alternative<PureState>(config.initial)
                       ? DensityMatrix::from_pure(std::get<PureState>(config.initial)).matrix()
                       : std::get<DensityMatrix>(config.initial).matrix();
    const double h = grid.dt;
    DensitySeries out;
    for (std::size_t n = 0;; ++n) {
        if (n % stride == 0) {
            out.times.push_back(grid.time(n));
            out.rho.push_back(rho);
        }
        if (n == grid.steps) break;
        const Operator k1 = generator.apply(rho);
        const Operator k2 = generator.apply(rho + 0.5 * h * k1);
        const Operator k3 = generator.apply(rho + 0.5 * h * k2);
        const Operator k4 = generator.apply(rho + h * k3);
        rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return out;
}

}  // namespace nmqsd

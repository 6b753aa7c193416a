#pragma once

#include <vector>

#include "nmqsd/simulation.hpp"

namespace nmqsd {

struct LindbladChannel {
    Operator jump;
    double rate;
};

class LindbladGenerator {
  public:
    LindbladGenerator(Operator hamiltonian, std::vector<LindbladChannel> channels);

    /// Markov limit of a configuration: rates Gamma/(1 +- lambda), or a single
    /// channel Gamma/2 on L_a at |lambda| = 1.
    static LindbladGenerator markov_limit(const SimulationConfig& config);

    Operator apply(const Operator& rho) const;
    const std::vector<LindbladChannel>& channels() const { return channels_; }

  private:
    Operator hamiltonian_;
    std::vector<LindbladChannel> channels_;
    Operator anticommutator_;  // sum_x rate_x L_x^dag L_x
};

/// RK4 on the output grid of `config`; mixed initial states are propagated
/// directly.
DensitySeries run_lindblad(const SimulationConfig& config);
DensitySeries run_lindblad(const SimulationConfig& config, const LindbladGenerator& generator);

}  // namespace nmqsd

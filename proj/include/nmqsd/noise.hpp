// Stationary complex Gaussian noise with exponential kernels.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "nmqsd/two_qubit.hpp"

namespace nmqsd {

/// alpha(t, s) = amplitude * exp(-decay_rate |t - s|).
struct ExponentialKernel {
    double amplitude = 0.0;
    double decay_rate = 0.0;

    double operator()(double lag) const;
    /// Integral of the kernel over the whole real line; the Lindblad rate of
    /// the delta-correlated limit.
    double markov_rate() const { return 2.0 * amplitude / decay_rate; }
};

/// Kernels of the two effective baths. `b` is absent in the common-bath
/// limit |lambda| = 1.
struct KernelPair {
    ExponentialKernel a;
    std::optional<ExponentialKernel> b;
};

/// Amplitudes Gamma*gamma/2, rates gamma(1 +- lambda). Throws
/// std::invalid_argument for |lambda| > 1 or nonpositive Gamma, gamma.
KernelPair make_kernels(double coupling, double bandwidth, double lambda);

/// Uniform time grid t_n = n * dt, n = 0..steps. Every step also owns the
/// midpoint, so the fine grid has spacing dt/2 and 2*steps + 1 points.
struct TimeGrid {
    double dt = 0.0;
    std::size_t steps = 0;

    static TimeGrid covering(double t_final, double dt);

    double time(std::size_t n) const { return static_cast<double>(n) * dt; }
    double fine_time(std::size_t k) const { return 0.5 * static_cast<double>(k) * dt; }
    std::size_t fine_count() const { return 2 * steps + 1; }
    double t_final() const { return time(steps); }
};

/// Independent random stream for one trajectory. The state is a pure
/// function of (master seed, trajectory index, substream).
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, std::uint64_t trajectory, std::uint64_t substream = 0);

    /// Circular complex standard normal: M[|xi|^2] = 1, M[xi^2] = 0.
    Complex circular_normal();
    double normal() { return normal_(engine_); }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Samples of every active bath on the fine grid (spacing fine_step).
struct NoisePath {
    double fine_step = 0.0;
    std::vector<std::vector<Complex>> baths;

    std::size_t size() const { return baths.empty() ? 0 : baths.front().size(); }
};

/// Exact OU recursion: z_0 ~ CN(0, A), z_{n+1} = z_n e^{-g h} + xi_n sqrt(A (1 - e^{-2 g h})).
std::vector<Complex> sample_ou_path(const ExponentialKernel& kernel, double step, std::size_t count,
                                    RngStream& rng);

/// Inserts conditional midpoints (OU bridge) between consecutive samples,
/// halving the spacing. Existing samples are kept unchanged.
std::vector<Complex> refine_ou_path(const std::vector<Complex>& path, const ExponentialKernel& kernel,
                                    double step, RngStream& rng);

/// Noise for trajectory `trajectory` on `grid`. With refine_levels > 0 the
/// path is first drawn on the grid coarsened by 2^refine_levels and then
/// bridged down, so paths at different resolutions share their coarse
/// samples.
NoisePath sample_noise_path(const std::vector<ExponentialKernel>& kernels, const TimeGrid& grid,
                            std::uint64_t master_seed, std::uint64_t trajectory,
                            int refine_levels = 0);

/// Running value of m(t) = int_0^t alpha(t, s) drive(s) ds.
struct MemoryAccumulator {
    Complex value{0.0, 0.0};
    ExponentialKernel kernel;
};

/// One RK4 step of dm/dt = A * drive - g * m with drive given at the start,
/// midpoint and end of the step.
MemoryAccumulator memory_step(const MemoryAccumulator& m, Complex drive_start, Complex drive_mid,
                              Complex drive_end, double dt);

inline MemoryAccumulator memory_step(const MemoryAccumulator& m, Complex drive, double dt) {
    return memory_step(m, drive, drive, drive, dt);
}

}  // namespace nmqsd

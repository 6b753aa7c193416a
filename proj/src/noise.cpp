#include "nmqsd/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nmqsd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

double ExponentialKernel::operator()(double lag) const {
    return amplitude * std::exp(-decay_rate * std::abs(lag));
}

KernelPair make_kernels(double coupling, double bandwidth, double lambda) {
    if (!(coupling > 0.0) || !std::isfinite(coupling))
        throw std::invalid_argument("make_kernels: coupling strength Gamma must be positive");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw std::invalid_argument("make_kernels: bandwidth gamma must be positive");
    if (!std::isfinite(lambda) || std::abs(lambda) > 1.0)
        throw std::invalid_argument(
            "make_kernels: |lambda| > 1 is rejected; the reduced dynamics may become unphysical "
            "and lose its positivity");
    const double amplitude = 0.5 * coupling * bandwidth;
    if (std::abs(lambda) == 1.0) return {{amplitude, 2.0 * bandwidth}, std::nullopt};
    return {{amplitude, bandwidth * (1.0 + lambda)}, ExponentialKernel{amplitude, bandwidth * (1.0 - lambda)}};
}

TimeGrid TimeGrid::covering(double t_final, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be positive");
    if (!(t_final >= dt)) throw std::invalid_argument("final time must be at least one time step");
    const double ratio = t_final / dt;
    auto steps = static_cast<std::size_t>(std::llround(ratio));
    if (std::abs(static_cast<double>(steps) - ratio) > 1e-9 * ratio)
        steps = static_cast<std::size_t>(std::ceil(ratio));
    return {dt, steps};
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t trajectory, std::uint64_t substream) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ trajectory);
    h = splitmix64(h ^ (substream * 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    engine_.seed(seq);
}

Complex RngStream::circular_normal() {
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {re * inv_sqrt2, im * inv_sqrt2};
}

std::vector<Complex> sample_ou_path(const ExponentialKernel& kernel, double step, std::size_t count,
                                    RngStream& rng) {
    if (!(step > 0.0)) throw std::invalid_argument("sample_ou_path: step must be positive");
    std::vector<Complex> z(count);
    if (count == 0) return z;
    const double decay = std::exp(-kernel.decay_rate * step);
    const double kick = std::sqrt(kernel.amplitude * (1.0 - decay * decay));
    z[0] = std::sqrt(kernel.amplitude) * rng.circular_normal();
    for (std::size_t n = 1; n < count; ++n) z[n] = z[n - 1] * decay + kick * rng.circular_normal();
    return z;
}

std::vector<Complex> refine_ou_path(const std::vector<Complex>& path, const ExponentialKernel& kernel,
                                    double step, RngStream& rng) {
    if (!(step > 0.0)) throw std::invalid_argument("refine_ou_path: step must be positive");
    if (path.size() < 2) return path;
    const double r = std::exp(-0.5 * kernel.decay_rate * step);
    const double weight = r / (1.0 + r * r);
    const double spread = std::sqrt(kernel.amplitude * (1.0 - r * r) / (1.0 + r * r));
    std::vector<Complex> fine(2 * path.size() - 1);
    for (std::size_t n = 0; n + 1 < path.size(); ++n) {
        fine[2 * n] = path[n];
        fine[2 * n + 1] = weight * (path[n] + path[n + 1]) + spread * rng.circular_normal();
    }
    fine.back() = path.back();
    return fine;
}

NoisePath sample_noise_path(const std::vector<ExponentialKernel>& kernels, const TimeGrid& grid,
                            std::uint64_t master_seed, std::uint64_t trajectory, int refine_levels) {
    if (!(grid.dt > 0.0)) throw std::invalid_argument("sample_noise_path: nonpositive time step");
    if (refine_levels < 0) throw std::invalid_argument("sample_noise_path: negative refinement level");
    const std::size_t intervals = 2 * grid.steps;
    const std::size_t factor = std::size_t{1} << refine_levels;
    if (intervals % factor != 0)
        throw std::invalid_argument("sample_noise_path: grid not divisible by 2^" +
                                    std::to_string(refine_levels));

    NoisePath path;
    path.fine_step = 0.5 * grid.dt;
    const double coarse_step = path.fine_step * static_cast<double>(factor);
    RngStream base(master_seed, trajectory, 0);
    for (const auto& kernel : kernels)
        path.baths.push_back(sample_ou_path(kernel, coarse_step, intervals / factor + 1, base));
    double step = coarse_step;
    for (int level = 1; level <= refine_levels; ++level) {
        RngStream bridge(master_seed, trajectory, static_cast<std::uint64_t>(level));
        for (std::size_t b = 0; b < kernels.size(); ++b)
            path.baths[b] = refine_ou_path(path.baths[b], kernels[b], step, bridge);
        step *= 0.5;
    }
    return path;
}

MemoryAccumulator memory_step(const MemoryAccumulator& m, Complex drive_start, Complex drive_mid,
                              Complex drive_end, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("memory_step: dt must be positive");
    const double a = m.kernel.amplitude;
    const double g = m.kernel.decay_rate;
    auto rhs = [&](Complex value, Complex drive) { return a * drive - g * value; };
    const Complex k1 = rhs(m.value, drive_start);
    const Complex k2 = rhs(m.value + 0.5 * dt * k1, drive_mid);
    const Complex k3 = rhs(m.value + 0.5 * dt * k2, drive_mid);
    const Complex k4 = rhs(m.value + dt * k3, drive_end);
    return {m.value + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), m.kernel};
}

}  // namespace nmqsd

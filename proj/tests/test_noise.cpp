#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "nmqsd/noise.hpp"

using namespace nmqsd;

TEST_CASE("make_kernels") {
    const auto k = make_kernels(1.0, 1.0, 0.2);
    REQUIRE(k.b.has_value());
    CHECK(k.a.decay_rate == doctest::Approx(1.2));
    CHECK(k.b->decay_rate == doctest::Approx(0.8));
    CHECK(k.a.amplitude == doctest::Approx(0.5));
    CHECK(k.b->amplitude == doctest::Approx(0.5));

    const auto same = make_kernels(1.0, 1.0, 0.0);
    CHECK(same.a.decay_rate == same.b->decay_rate);

    const auto common = make_kernels(1.0, 1.0, 1.0);
    CHECK_FALSE(common.b.has_value());
    CHECK(common.a.decay_rate == doctest::Approx(2.0));
    CHECK(common.a.amplitude == doctest::Approx(0.5));

    try {
        make_kernels(1.0, 1.0, 1.5);
        FAIL("lambda = 1.5 accepted");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("positivity") != std::string::npos);
    }
    CHECK_THROWS(make_kernels(0.0, 1.0, 0.0));
    CHECK_THROWS(make_kernels(1.0, -1.0, 0.0));
}

TEST_CASE("markov rate") {
    const auto k = make_kernels(1.0, 3.0, 0.5);
    CHECK(k.a.markov_rate() == doctest::Approx(1.0 / 1.5));
    CHECK(k.b->markov_rate() == doctest::Approx(1.0 / 0.5));
}

TEST_CASE("noise path layout and determinism") {
    const auto k = make_kernels(1.0, 1.0, 0.6);
    const std::vector<ExponentialKernel> ks{k.a, *k.b};
    const TimeGrid grid = TimeGrid::covering(2.0, 0.01);
    const NoisePath p = sample_noise_path(ks, grid, 42, 7);
    REQUIRE(p.baths.size() == 2);
    CHECK(p.size() == 2 * grid.steps + 1);
    for (const auto& bath : p.baths)
        for (const auto& z : bath) CHECK(std::isfinite(std::abs(z)));

    const NoisePath again = sample_noise_path(ks, grid, 42, 7);
    CHECK(again.baths == p.baths);
    CHECK(sample_noise_path(ks, grid, 42, 8).baths != p.baths);
    CHECK(sample_noise_path(ks, grid, 43, 7).baths != p.baths);
    RngStream rng(1, 1);
    CHECK_THROWS(sample_ou_path(k.a, 0.0, 10, rng));
}

TEST_CASE("refined paths share coarse samples") {
    const auto k = make_kernels(1.0, 1.0, 0.3);
    const std::vector<ExponentialKernel> ks{k.a, *k.b};
    const NoisePath coarse = sample_noise_path(ks, TimeGrid::covering(1.0, 0.02), 9, 3, 1);
    const NoisePath fine = sample_noise_path(ks, TimeGrid::covering(1.0, 0.01), 9, 3, 2);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t i = 0; i < coarse.size(); ++i) CHECK(fine.baths[b][2 * i] == coarse.baths[b][i]);
}

namespace {

// Empirical statistics at fixed times over independent paths, compared with
// the closed-form kernel.
struct Moments {
    std::vector<Complex> mean, corr, pseudo;
    std::vector<double> corr_se, pseudo_se, var, var_se;
};

Moments gather(const std::vector<ExponentialKernel>& ks, std::size_t bath, const TimeGrid& grid, int refine,
               std::size_t paths, std::size_t origin) {
    const std::size_t len = grid.fine_count();
    Moments m;
    m.mean.assign(len, 0.0);
    m.corr.assign(len, 0.0);
    m.pseudo.assign(len, 0.0);
    m.corr_se.assign(len, 0.0);
    m.pseudo_se.assign(len, 0.0);
    m.var.assign(len, 0.0);
    m.var_se.assign(len, 0.0);
    for (std::size_t p = 0; p < paths; ++p) {
        const auto z = sample_noise_path(ks, grid, 2024, p, refine).baths[bath];
        for (std::size_t i = 0; i < len; ++i) {
            m.mean[i] += z[i];
            m.var[i] += std::norm(z[i]);
            m.var_se[i] += std::norm(z[i]) * std::norm(z[i]);
            if (i >= origin) {
                const Complex c = std::conj(z[origin]) * z[i], q = z[origin] * z[i];
                m.corr[i] += c;
                m.pseudo[i] += q;
                m.corr_se[i] += std::norm(c);
                m.pseudo_se[i] += std::norm(q);
            }
        }
    }
    const double n = static_cast<double>(paths);
    for (std::size_t i = 0; i < len; ++i) {
        m.mean[i] /= n;
        m.corr[i] /= n;
        m.pseudo[i] /= n;
        m.var[i] /= n;
        m.corr_se[i] = std::sqrt((m.corr_se[i] / n - std::norm(m.corr[i])) / n);
        m.pseudo_se[i] = std::sqrt((m.pseudo_se[i] / n - std::norm(m.pseudo[i])) / n);
        m.var_se[i] = std::sqrt((m.var_se[i] / n - m.var[i] * m.var[i]) / n);
    }
    return m;
}

void check_statistics(int refine) {
    const auto k = make_kernels(1.0, 1.0, 0.6);
    const std::vector<ExponentialKernel> ks{k.a, *k.b};
    const std::size_t paths = 20000;
    for (std::size_t b = 0; b < 2; ++b) {
        const ExponentialKernel& kern = ks[b];
        const double dt = 0.25 / kern.decay_rate;
        const TimeGrid grid{dt, 8};  // fine spacing dt/2, lags up to 4/gamma_x
        const Moments m = gather(ks, b, grid, refine, paths, 2);
        for (std::size_t i = 0; i < grid.fine_count(); ++i) {
            CHECK(std::abs(m.mean[i]) <= 3.0 * std::sqrt(kern.amplitude / paths));
            CHECK(std::abs(m.var[i] - kern.amplitude) <= 5.0 * m.var_se[i]);
            if (i < 2) continue;
            const double lag = grid.fine_time(i) - grid.fine_time(2);
            // 5 standard errors, which for lags <= 3/gamma is well inside 5% at 10^5 paths
            CHECK(std::abs(m.corr[i] - kern(lag)) <= 5.0 * m.corr_se[i]);
            CHECK(std::abs(m.pseudo[i]) <= 5.0 * m.pseudo_se[i]);
        }
    }
}

}  // namespace

TEST_CASE("noise statistics match the kernel") { check_statistics(0); }

TEST_CASE("bridged noise keeps the statistics") { check_statistics(3); }

TEST_CASE("memory_step") {
    MemoryAccumulator m{Complex(0.3, -0.2), ExponentialKernel{0.5, 1.7}};
    CHECK(std::abs(MemoryAccumulator{}.value) == 0.0);

    SUBCASE("homogeneous decay") {
        MemoryAccumulator cur = m;
        for (int i = 0; i < 1000; ++i) cur = memory_step(cur, 0.0, 1e-3);
        CHECK(std::abs(cur.value - m.value * std::exp(-1.7)) < 1e-12);
    }
    SUBCASE("constant drive") {
        const Complex c(0.4, 0.9);
        MemoryAccumulator cur{0.0, m.kernel};
        for (int i = 0; i < 2000; ++i) cur = memory_step(cur, c, 1e-3);
        const Complex exact = 0.5 / 1.7 * c * (1.0 - std::exp(-1.7 * 2.0));
        CHECK(std::abs(cur.value - exact) < 1e-12);
    }
    SUBCASE("fourth order with a time-dependent drive") {
        // drive e^{i w t}: m(t) = A (e^{i w t} - e^{-g t}) / (g + i w)
        const double w = 3.0, t_end = 2.0;
        auto drive = [&](double t) { return std::exp(kI * w * t); };
        const Complex exact = 0.5 * (std::exp(kI * w * t_end) - std::exp(-1.7 * t_end)) / (1.7 + kI * w);
        double err[3];
        for (int r = 0; r < 3; ++r) {
            const int n = 20 << r;
            const double h = t_end / n;
            MemoryAccumulator cur{0.0, m.kernel};
            for (int i = 0; i < n; ++i) cur = memory_step(cur, drive(i * h), drive((i + 0.5) * h), drive((i + 1) * h), h);
            err[r] = std::abs(cur.value - exact);
        }
        CHECK(std::log2(err[0] / err[1]) >= 3.5);
        CHECK(std::log2(err[1] / err[2]) >= 3.5);
    }
}

TEST_CASE("time grid") {
    const TimeGrid g = TimeGrid::covering(1.0, 0.1);
    CHECK(g.steps == 10);
    CHECK(g.fine_count() == 21);
    CHECK(g.t_final() == doctest::Approx(1.0));
    CHECK_THROWS(TimeGrid::covering(1.0, 0.0));
    CHECK_THROWS(TimeGrid::covering(0.01, 0.1));
}

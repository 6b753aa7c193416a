#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nmqsd/coefficients.hpp"
#include "nmqsd/noise.hpp"
#include "nmqsd/simulation.hpp"

namespace nmqsd {

// All numbers are written with 17 significant digits so that reading a file
// back reproduces the doubles exactly.

void write_observables(std::ostream& out, const ObservableTable& table);
ObservableTable read_observables(std::istream& in);

// Sidecar layout: one "# ..." header line, then per output time a line
// "t,<time>" followed by the 4x8 operator block.
void write_density_series(std::ostream& out, const DensitySeries& series);
DensitySeries read_density_series(std::istream& in);

void write_noise_path(std::ostream& out, const NoisePath& path);
void write_coefficients(std::ostream& out, const OCoefficients& coeffs);

struct TraceDistanceSeries {
    std::vector<double> times;
    std::vector<double> distance;
};

/// Requires matching time axes (to 1e-9).
TraceDistanceSeries compare_series(const DensitySeries& a, const DensitySeries& b);
void write_trace_distance(std::ostream& out, const TraceDistanceSeries& d);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace nmqsd

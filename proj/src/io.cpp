#include "nmqsd/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nmqsd {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> split_numbers(const std::string& line, std::size_t expected) {
    std::vector<double> out;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
        std::size_t used = 0;
        out.push_back(std::stod(cell, &used));
        if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos)
            throw std::runtime_error("csv: malformed number '" + cell + "'");
    }
    if (out.size() != expected)
        throw std::runtime_error("csv: expected " + std::to_string(expected) + " columns, got " +
                                 std::to_string(out.size()));
    return out;
}

constexpr const char* kObservableHeader =
    "t,C_xx,C_xx_stderr,concurrence,concurrence_stderr,ground_population";

}  // namespace

void write_observables(std::ostream& out, const ObservableTable& t) {
    out << kObservableHeader << '\n';
    for (std::size_t i = 0; i < t.times.size(); ++i) {
        out << num(t.times[i]) << ',' << num(t.inner_correlation[i]) << ',' << num(t.inner_correlation_stderr[i])
            << ',' << num(t.concurrence[i]) << ',' << num(t.concurrence_stderr[i]) << ','
            << num(t.ground_population[i]) << '\n';
    }
}

ObservableTable read_observables(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kObservableHeader, 0) != 0)
        throw std::runtime_error("observables csv: missing header");
    ObservableTable t;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto v = split_numbers(line, 6);
        t.times.push_back(v[0]);
        t.inner_correlation.push_back(v[1]);
        t.inner_correlation_stderr.push_back(v[2]);
        t.concurrence.push_back(v[3]);
        t.concurrence_stderr.push_back(v[4]);
        t.ground_population.push_back(v[5]);
    }
    return t;
}

void write_density_series(std::ostream& out, const DensitySeries& s) {
    out << "# rho(t): basis |11>,|10>,|01>,|00>; 4 rows x (re,im) x 4 columns per time\n";
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        out << "t," << num(s.times[i]) << '\n';
        write_operator_block(out, s.rho[i]);
    }
}

DensitySeries read_density_series(std::istream& in) {
    DensitySeries s;
    std::string line;
    if (!std::getline(in, line) || line.empty() || line[0] != '#')
        throw std::runtime_error("density series: missing header line");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("t,", 0) != 0) throw std::runtime_error("density series: expected a 't,<time>' line");
        s.times.push_back(std::stod(line.substr(2)));
        s.rho.push_back(read_operator_block(in));
    }
    return s;
}

void write_noise_path(std::ostream& out, const NoisePath& path) {
    out << "t,re_z_a,im_z_a,re_z_b,im_z_b\n";
    for (std::size_t k = 0; k < path.size(); ++k) {
        out << num(path.fine_step * static_cast<double>(k));
        for (std::size_t x = 0; x < 2; ++x) {
            const Complex z = x < path.baths.size() ? path.baths[x][k] : Complex(0.0);
            out << ',' << num(z.real()) << ',' << num(z.imag());
        }
        out << '\n';
    }
}

void write_coefficients(std::ostream& out, const OCoefficients& coeffs) {
    out << 't';
    for (const char* x : {"a", "b"})
        for (int j = 1; j <= 4; ++j) out << ",re_F_" << x << j << ",im_F_" << x << j;
    out << '\n';
    for (std::size_t n = 0; n <= coeffs.grid().steps; ++n) {
        out << num(coeffs.grid().time(n));
        for (int x = 0; x < 2; ++x)
            for (int j = 0; j < 4; ++j) {
                const Complex f = x < coeffs.bath_count() ? coeffs.F(x, j, n) : Complex(0.0);
                out << ',' << num(f.real()) << ',' << num(f.imag());
            }
        out << '\n';
    }
}

TraceDistanceSeries compare_series(const DensitySeries& a, const DensitySeries& b) {
    if (a.times.size() != b.times.size())
        throw std::invalid_argument("compare: series have different lengths (" + std::to_string(a.times.size()) +
                                    " vs " + std::to_string(b.times.size()) + ")");
    TraceDistanceSeries d;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        if (std::abs(a.times[i] - b.times[i]) > 1e-9 * std::max(1.0, std::abs(a.times[i])))
            throw std::invalid_argument("compare: time axes differ at row " + std::to_string(i));
        d.times.push_back(a.times[i]);
        d.distance.push_back(trace_distance(a.rho[i], b.rho[i]));
    }
    return d;
}

void write_trace_distance(std::ostream& out, const TraceDistanceSeries& d) {
    out << "t,trace_distance\n";
    for (std::size_t i = 0; i < d.times.size(); ++i) out << num(d.times[i]) << ',' << num(d.distance[i]) << '\n';
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << contents;
    if (!f) throw std::runtime_error("write to " + path + " failed");
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace nmqsd

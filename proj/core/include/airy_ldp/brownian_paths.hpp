#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace airy_ldp {

struct PathGrid {
    double step = 0.0;
    double length = 0.0;
    std::size_t n_points = 0;

    double x(std::size_t j) const { return static_cast<double>(j) * step; }
};

// n_points = round(x_max / step) + 1; length is snapped to (n_points - 1) * step.
PathGrid make_grid(double step, double x_max);

// Piecewise-constant V: levels[i] on (breakpoints[i], breakpoints[i+1]], zero elsewhere.
struct DriftProfile {
    std::vector<double> breakpoints;
    std::vector<double> levels;

    void validate() const;
    double level_at(double x) const;
    // int_0^x V(y) dy
    double integral(double x) const;
    // int_0^inf V(y)^2 dy
    double energy() const;
    double end() const { return breakpoints.empty() ? 0.0 : breakpoints.back(); }
};

struct BrownianPath {
    PathGrid grid;
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::optional<DriftProfile> drift_applied;

    // Linear interpolation between nodes.
    double at(double x) const;
    // Index of the grid node at x; throws unless x is a node up to rounding.
    std::size_t node_index(double x) const;
    bool is_node(double x) const;
};

BrownianPath sample_path(const PathGrid& grid, std::uint64_t seed, std::uint64_t stream = 0);

// Deterministic path from given nodal values (values[0] must be 0).
BrownianPath path_from_values(const PathGrid& grid, std::vector<double> values);
BrownianPath zero_path(const PathGrid& grid);

BrownianPath add_drift(const BrownianPath& path, const DriftProfile& drift);

// Convolution with a normalized bump of half-width epsilon, even reflection at both ends.
BrownianPath mollify(const BrownianPath& path, double epsilon);

// max over nodes x in [a, b] of |B(x) - B(a)|.
double increment_max(const BrownianPath& path, double a, double b);

// -int V dB + 1/2 int V^2 dx. Each grid cell carries d_j = int_cell V; the
// returned value is -sum_j d_j dB_j / h + sum_j d_j^2 / (2h), which is the
// exact log likelihood ratio of the discretized increments and reduces to
// -sum_i V_i (B(x_i) - B(x_{i-1})) + 1/2 int V^2 when breakpoints are nodes.
double girsanov_log_weight(const BrownianPath& path, const DriftProfile& drift);

void write_path_csv(std::ostream& out, const BrownianPath& path);
BrownianPath read_path_csv(std::istream& in);
void write_path_binary(std::ostream& out, const BrownianPath& path);
BrownianPath read_path_binary(std::istream& in);

}  // namespace airy_ldp

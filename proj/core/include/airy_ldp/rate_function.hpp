#pragma once

#include <cstddef>
#include <vector>

#include "airy_ldp/brownian_paths.hpp"
#include "airy_ldp/model.hpp"

namespace airy_ldp {

// Phi(z) = (4/15pi^6)(1 - pi^2 z)^{5/2} - 4/15pi^6 + (2/3pi^4) z - (1/2pi^2) z^2, z <= 0.
double phi(double z);

// L (2L/beta)^5 Phi(-(beta/2L)^2 zeta), as a positive magnitude.
double scaled_rate(const ModelParams& params);

double v_star(double x, const ModelParams& params);

// Piecewise-constant control: values[k] on [grid[k], grid[k+1]), zero past grid.back().
struct Control {
    std::vector<double> grid;
    std::vector<double> values;

    void validate() const;
};

Control uniform_control(double x_max, std::size_t cells, double value = 0.0);
// v_* evaluated at the cell midpoints of a uniform grid on [0, x_max].
Control sample_v_star(const ModelParams& params, double x_max, std::size_t cells);

// int_0^inf (2L/3pi) ((zeta - x - (2/sqrt beta) v)_+)^{3/2} + v^2/2 dx.
double objective(const Control& control, const ModelParams& params);

struct MinimizeOptions {
    double tolerance = 1e-10;
    std::size_t max_sweeps = 50;
};

// Cell-wise golden-section descent from v = 0 on a uniform grid of [0, zeta].
Control minimize_objective(const ModelParams& params, std::size_t grid_size, const MinimizeOptions& options = {});

// V_i = t^{2/3} v_*(t^{-2/3} x_{i-1}) on the partition of make_partition(t, alpha, zeta).
DriftProfile tilt_profile(double t, double alpha, const ModelParams& params);

struct GaussianReduction {
    ModelParams params;
    double t = 1.0;
    double alpha = 0.0;
    double x_i = 0.0;
    double y_star = 0.0;
    double F_min = 0.0;

    double F(double y) const;
    // Point where the positive part switches off.
    double y_kink() const;
};

// Minimizer of
//   F(y) = (2L/3pi) t^{1/3+alpha} (t^{2/3} zeta - x_i - (2/sqrt beta) t^{-alpha/2} y)_+^{3/2} + y^2/2,
// which is y_* = t^{2/3+alpha/2} v_*(t^{-2/3} x_i).
GaussianReduction gaussian_reduction(const ModelParams& params, double t, double alpha, double x_i);

}  // namespace airy_ldp

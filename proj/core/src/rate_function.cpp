#include "airy_ldp/rate_function.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace airy_ldp {

namespace {

constexpr double kPi = std::numbers::pi;
// Below this |u| the cubic-and-higher remainder is summed as a series.
constexpr double kSeriesCutoff = 0.1;

// (1+u)^{5/2} - 1 - (5/2)u - (15/8)u^2 for u >= 0.
double binomial_remainder(double u) {
    if (u < kSeriesCutoff) {
        double coeff = 2.5 * 1.5 * 0.5 / 6.0;  // binom(5/2, 3)
        double power = u * u * u;
        double acc = 0.0;
        for (int k = 3; k < 40; ++k) {
            const double term = coeff * power;
            acc += term;
            if (std::abs(term) <= 1e-18 * std::abs(acc)) break;
            coeff *= (2.5 - k) / (k + 1.0);
            power *= u;
        }
        return acc;
    }
    return std::pow(1.0 + u, 2.5) - 1.0 - 2.5 * u - 1.875 * u * u;
}

// (2/5)((c - x_a)_+^{5/2} - (c - x_b)_+^{5/2}) = int_{x_a}^{x_b} (c - x)_+^{3/2} dx
double cell_power_integral(double c, double x_a, double x_b) {
    const double ua = std::max(c - x_a, 0.0);
    const double ub = std::max(c - x_b, 0.0);
    return 0.4 * (ua * ua * std::sqrt(ua) - ub * ub * std::sqrt(ub));
}

double cell_cost(double v, double x_a, double x_b, const ModelParams& p) {
    const double coef = 2.0 * p.L / (3.0 * kPi);
    const double c = p.zeta - p.noise_scale() * v;
    return coef * cell_power_integral(c, x_a, x_b) + 0.5 * v * v * (x_b - x_a);
}

template <typename F>
double golden_section(F&& f, double lo, double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    const double mid = 0.5 * (a + b);
    // The bracket endpoints can win when the minimum sits on the boundary.
    const double candidates[3] = {lo, mid, hi};
    double best = mid;
    double f_best = f(mid);
    for (double x : candidates) {
        const double fx = f(x);
        if (fx < f_best) {
            best = x;
            f_best = fx;
        }
    }
    return best;
}

}  // namespace

double phi(double z) {
    if (std::isnan(z) || z > 0.0) throw std::invalid_argument("phi: z must be non-positive");
    if (z == 0.0) return 0.0;
    const double pi2 = kPi * kPi;
    const double pi6 = pi2 * pi2 * pi2;
    return 4.0 / (15.0 * pi6) * binomial_remainder(-pi2 * z);
}

double scaled_rate(const ModelParams& params) {
    params.validate();
    const double r = 2.0 * params.L / params.beta;
    const double scale = params.beta / (2.0 * params.L);
    return params.L * std::pow(r, 5) * phi(-scale * scale * params.zeta);
}

double v_star(double x, const ModelParams& params) {
    params.validate();
    if (x < 0.0) throw std::invalid_argument("v_star: x must be non-negative");
    const double gap = params.zeta - x;
    if (gap <= 0.0) return 0.0;
    const double pi2 = kPi * kPi;
    const double amp = 4.0 * params.L * params.L / (pi2 * std::pow(params.beta, 1.5));
    const double k = kPi * params.beta / (2.0 * params.L);
    const double s = k * k * gap;
    // sqrt(1+s) - 1 = s / (sqrt(1+s) + 1) avoids cancellation for small s.
    return amp * s / (std::sqrt(1.0 + s) + 1.0);
}

void Control::validate() const {
    if (grid.size() < 2) throw std::invalid_argument("Control: grid needs at least two points");
    if (values.size() + 1 != grid.size()) throw std::invalid_argument("Control: values.size() must be grid.size() - 1");
    if (grid.front() != 0.0) throw std::invalid_argument("Control: grid must start at 0");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw std::invalid_argument("Control: grid must be strictly increasing");
    }
}

Control uniform_control(double x_max, std::size_t cells, double value) {
    if (!(x_max > 0.0) || cells == 0) throw std::invalid_argument("uniform_control: bad grid");
    Control c;
    c.grid.resize(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) c.grid[k] = x_max * static_cast<double>(k) / static_cast<double>(cells);
    c.values.assign(cells, value);
    return c;
}

Control sample_v_star(const ModelParams& params, double x_max, std::size_t cells) {
    Control c = uniform_control(x_max, cells);
    for (std::size_t k = 0; k < cells; ++k) c.values[k] = v_star(0.5 * (c.grid[k] + c.grid[k + 1]), params);
    return c;
}

double objective(const Control& control, const ModelParams& params) {
    params.validate();
    control.validate();
    if (control.grid.back() < params.zeta * (1.0 - 1e-12)) {
        throw std::invalid_argument("objective: control grid does not cover [0, zeta]");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < control.values.size(); ++k) {
        acc += cell_cost(control.values[k], control.grid[k], control.grid[k + 1], params);
    }
    // Past the grid v = 0; only a sliver remains if the grid end rounds below zeta.
    const double coef = 2.0 * params.L / (3.0 * kPi);
    acc += coef * cell_power_integral(params.zeta, control.grid.back(), std::max(params.zeta, control.grid.back()));
    return acc;
}

Control minimize_objective(const ModelParams& params, std::size_t grid_size, const MinimizeOptions& options) {
    params.validate();
    if (grid_size < 100) throw std::invalid_argument("minimize_objective: grid_size must be at least 100");
    Control c = uniform_control(params.zeta, grid_size);
    // Past v = zeta * sqrt(beta) / 2 the positive part is zero everywhere and the cost only grows.
    const double v_max = params.zeta * std::sqrt(params.beta) / 2.0;
    double current = objective(c, params);
    for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
        for (std::size_t k = 0; k < grid_size; ++k) {
            const double xa = c.grid[k];
            const double xb = c.grid[k + 1];
            auto f = [&](double v) { return cell_cost(v, xa, xb, params); };
            const double v = golden_section(f, 0.0, v_max, 1e-13 * std::max(1.0, v_max));
            if (f(v) < f(c.values[k])) c.values[k] = v;
        }
        const double next = objective(c, params);
        const double decrease = current - next;
        current = next;
        if (decrease < options.tolerance) return c;
    }
    // Report the largest one-sided slope as a gradient proxy.
    double grad = 0.0;
    for (std::size_t k = 0; k < grid_size; ++k) {
        const double eps = 1e-7;
        const double g = (cell_cost(c.values[k] + eps, c.grid[k], c.grid[k + 1], params) -
                          cell_cost(c.values[k], c.grid[k], c.grid[k + 1], params)) / eps;
        grad = std::max(grad, std::abs(g));
    }
    std::ostringstream msg;
    msg << "minimize_objective: no convergence after " << options.max_sweeps << " sweeps, gradient norm " << grad;
    throw std::runtime_error(msg.str());
}

DriftProfile tilt_profile(double t, double alpha, const ModelParams& params) {
    params.validate();
    check_alpha(alpha);
    const Partition part = make_partition(t, alpha, params.zeta);
    const double t23 = std::cbrt(t * t);
    DriftProfile d;
    d.breakpoints = part.points;
    d.levels.resize(part.n_intervals());
    for (std::size_t i = 0; i < d.levels.size(); ++i) d.levels[i] = t23 * v_star(part.points[i] / t23, params);
    return d;
}

double GaussianReduction::F(double y) const {
    const double coef = 2.0 * params.L / (3.0 * kPi) * std::pow(t, 1.0 / 3.0 + alpha);
    const double s = std::cbrt(t * t) * params.zeta - x_i - params.noise_scale() * std::pow(t, -alpha / 2.0) * y;
    const double sp = std::max(s, 0.0);
    return coef * sp * std::sqrt(sp) + 0.5 * y * y;
}

double GaussianReduction::y_kink() const {
    return (std::cbrt(t * t) * params.zeta - x_i) / (params.noise_scale() * std::pow(t, -alpha / 2.0));
}

GaussianReduction gaussian_reduction(const ModelParams& params, double t, double alpha, double x_i) {
    params.validate();
    if (!(t > 0.0)) throw std::invalid_argument("gaussian_reduction: t must be positive");
    if (x_i < 0.0) throw std::invalid_argument("gaussian_reduction: x_i must be non-negative");
    GaussianReduction g;
    g.params = params;
    g.t = t;
    g.alpha = alpha;
    g.x_i = x_i;
    const double t23 = std::cbrt(t * t);
    g.y_star = std::pow(t, 2.0 / 3.0 + alpha / 2.0) * v_star(x_i / t23, params);
    g.F_min = g.F(g.y_star);
    return g;
}

}  // namespace airy_ldp

#include "airy_ldp/cost_function.hpp"

#include <cmath>
#include <stdexcept>

namespace airy_ldp {

namespace {

void check_t(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("cost: t must be positive");
}

}  // namespace

double w_t(double lambda, double t) {
    check_t(t);
    const double u = std::cbrt(t) * lambda;
    if (u >= 0.0) return std::log1p(std::exp(-u));
    return -u + std::log1p(std::exp(u));
}

double w_t_deriv(double lambda, double t) {
    check_t(t);
    const double s = std::cbrt(t);
    const double u = s * lambda;
    // sigmoid(-u) = 1 / (1 + e^u)
    if (u >= 0.0) {
        const double e = std::exp(-u);
        return -s * e / (1.0 + e);
    }
    return -s / (1.0 + std::exp(u));
}

DoubleExp double_exp_proxy(double x, double b) {
    if (!(b > 0.0)) throw std::invalid_argument("double_exp_proxy: b must be positive");
    const double log_value = -b * std::exp(x);
    return {std::exp(log_value), log_value};
}

}  // namespace airy_ldp

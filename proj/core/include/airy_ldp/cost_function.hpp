#pragma once

namespace airy_ldp {

// w_t(lambda) = log(1 + exp(-t^{1/3} lambda)), evaluated without overflow.
double w_t(double lambda, double t);

// d/dlambda w_t = -t^{1/3} * sigmoid(-t^{1/3} lambda).
double w_t_deriv(double lambda, double t);

struct DoubleExp {
    double value;      // exp(-b e^x), may underflow to 0
    double log_value;  // -b e^x, may be -inf
};

// F(x) = exp(-b e^x).
DoubleExp double_exp_proxy(double x, double b);

}  // namespace airy_ldp

#pragma once

#include <cstddef>
#include <vector>

namespace airy_ldp {

struct ModelParams {
    double beta = 2.0;
    double L = 1.0;
    double zeta = 1.0;

    void validate() const;
    // Coefficient in front of the white noise, 2/sqrt(beta).
    double noise_scale() const;
};

// Breakpoints x_0 = 0 < x_1 < ... < x_{i_*}. Interval i is (x_{i-1}, x_i];
// everything beyond x_{i_*} forms one trailing bucket.
struct Partition {
    std::vector<double> points;

    std::size_t n_intervals() const { return points.empty() ? 0 : points.size() - 1; }
    std::size_t n_buckets() const { return points.size(); }
    void validate() const;
};

// x_i = i * t^alpha for i = 0..i_*, with i_* = ceil(zeta * t^(2/3 - alpha)) + 1.
Partition make_partition(double t, double alpha, double zeta);

void check_alpha(double alpha);

}  // namespace airy_ldp

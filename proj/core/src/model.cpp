#include "airy_ldp/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace airy_ldp {

void ModelParams::validate() const {
    if (!(beta > 0.0) || !(L > 0.0) || !(zeta > 0.0) || !std::isfinite(beta) ||
        !std::isfinite(L) || !std::isfinite(zeta)) {
        throw std::invalid_argument("ModelParams: beta, L and zeta must be finite and positive");
    }
}

double ModelParams::noise_scale() const { return 2.0 / std::sqrt(beta); }

void Partition::validate() const {
    if (points.size() < 2) throw std::invalid_argument("Partition: need at least two points");
    if (points.front() != 0.0) throw std::invalid_argument("Partition: must start at 0");
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (!(points[i] > points[i - 1])) {
            throw std::invalid_argument("Partition: points must be strictly increasing");
        }
    }
}

void check_alpha(double alpha) {
    if (!(alpha > -1.0 / 3.0 && alpha < 2.0 / 3.0)) {
        throw std::invalid_argument("alpha must lie in (-1/3, 2/3), got " + std::to_string(alpha));
    }
}

Partition make_partition(double t, double alpha, double zeta) {
    if (!(t > 0.0)) throw std::invalid_argument("make_partition: t must be positive");
    if (!(zeta > 0.0)) throw std::invalid_argument("make_partition: zeta must be positive");
    check_alpha(alpha);
    const double width = std::pow(t, alpha);
    const double i_star = std::ceil(zeta * std::pow(t, 2.0 / 3.0 - alpha)) + 1.0;
    const auto n = static_cast<std::size_t>(i_star);
    Partition p;
    p.points.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) p.points[i] = static_cast<double>(i) * width;
    return p;
}

}  // namespace airy_ldp

#include "airy_ldp/spectral_oracle.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace airy_ldp {

namespace {

constexpr double kPi = std::numbers::pi;

double pivmin_for(const TridiagonalOperator& op) {
    double bmax = 1.0;
    for (double e : op.offdiag) bmax = std::max(bmax, e * e);
    if (op.corner) bmax = std::max(bmax, *op.corner * *op.corner);
    return DBL_MIN * bmax;
}

std::size_t sturm_open_chain(const TridiagonalOperator& op, double lambda, double pivmin) {
    const std::size_t n = op.size();
    std::size_t negatives = 0;
    double d = op.diag[0] - lambda;
    if (std::abs(d) < pivmin) d = -pivmin;
    if (d < 0.0) ++negatives;
    for (std::size_t k = 1; k < n; ++k) {
        const double b = op.offdiag[k - 1];
        d = (op.diag[k] - lambda) - b * b / d;
        if (std::abs(d) < pivmin) d = -pivmin;
        if (d < 0.0) ++negatives;
    }
    return negatives;
}

// Inertia of the periodic matrix: LDL^T of the open chain on nodes 0..n-2,
// with the last node eliminated as a border. Returns false when a pivot
// vanishes so the caller can shift lambda.
bool sturm_periodic(const TridiagonalOperator& op, double lambda, double pivmin, std::size_t& negatives) {
    const std::size_t n = op.size();
    negatives = 0;
    double d = op.diag[0] - lambda;
    double e = *op.corner;
    double schur = op.diag[n - 1] - lambda;
    for (std::size_t k = 0;; ++k) {
        if (std::abs(d) < pivmin) return false;
        if (d < 0.0) ++negatives;
        schur -= e * e / d;
        if (k + 1 == n - 1) break;
        const double b = op.offdiag[k];
        const double l = b / d;
        const double coupling = (k + 1 == n - 2) ? op.offdiag[n - 2] : 0.0;
        e = coupling - l * e;
        d = (op.diag[k + 1] - lambda) - l * b;
    }
    if (!std::isfinite(schur) || std::abs(schur) < pivmin) return false;
    if (schur < 0.0) ++negatives;
    return true;
}

// Solves (T - mu) x = rhs for a periodic operator: Sherman-Morrison on the
// corner plus a tridiagonal solve with partial pivoting.
std::vector<double> solve_shifted_periodic(const TridiagonalOperator& op, double mu, std::vector<double> rhs) {
    const std::size_t n = op.size();
    const double tiny = DBL_EPSILON * std::max(1.0, std::abs(op.gershgorin().second));
    const double c = *op.corner;
    const double gamma = op.diag[0] == mu ? 1.0 : -(op.diag[0] - mu);
    auto tridiagonal = [&](std::vector<double> b) {
        std::vector<double> d(n);
        std::vector<double> du(op.offdiag);
        std::vector<double> dl(op.offdiag);
        std::vector<double> du2(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) d[i] = op.diag[i] - mu;
        d[0] -= gamma;
        d[n - 1] -= c * c / gamma;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (std::abs(d[i]) >= std::abs(dl[i])) {
                if (d[i] == 0.0) d[i] = tiny;
                const double m = dl[i] / d[i];
                d[i + 1] -= m * du[i];
                b[i + 1] -= m * b[i];
            } else {
                const double m = d[i] / dl[i];
                const double next_du = i + 2 < n ? du[i + 1] : 0.0;
                d[i] = dl[i];
                const double old_d = d[i + 1];
                d[i + 1] = du[i] - m * old_d;
                du[i] = old_d;
                du2[i] = next_du;
                if (i + 2 < n) du[i + 1] = -m * next_du;
                std::swap(b[i], b[i + 1]);
                b[i + 1] -= m * b[i];
            }
        }
        if (d[n - 1] == 0.0) d[n - 1] = tiny;
        std::vector<double> x(n);
        for (std::size_t k = n; k-- > 0;) {
            double acc = b[k];
            if (k + 1 < n) acc -= du[k] * x[k + 1];
            if (k + 2 < n) acc -= du2[k] * x[k + 2];
            x[k] = acc / d[k];
        }
        return x;
    };
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = c;
    const std::vector<double> z = tridiagonal(std::move(rhs));
    const std::vector<double> q = tridiagonal(u);
    const double vz = z[0] + c / gamma * z[n - 1];
    const double vq = q[0] + c / gamma * q[n - 1];
    const double denom = std::abs(1.0 + vq) < tiny ? tiny : 1.0 + vq;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = z[i] - q[i] * vz / denom;
    return x;
}

// Inverse iteration at mu; returns the Rayleigh quotient and ||T x - rho x|| for unit x.
std::pair<double, double> rayleigh_polish(const TridiagonalOperator& op, double mu) {
    const std::size_t n = op.size();
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = 1.0 + 0.5 * std::sin(1.3 * static_cast<double>(j) + 0.7);
    for (int it = 0; it < 3; ++it) {
        x = solve_shifted_periodic(op, mu, std::move(x));
        double norm = 0.0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm)) return {mu, std::numeric_limits<double>::infinity()};
        for (double& v : x) v /= norm;
    }
    const std::vector<double> tx = op.apply(x);
    double rho = 0.0;
    for (std::size_t j = 0; j < n; ++j) rho += x[j] * tx[j];
    double res = 0.0;
    for (std::size_t j = 0; j < n; ++j) res += (tx[j] - rho * x[j]) * (tx[j] - rho * x[j]);
    return {rho, std::sqrt(res)};
}

}  // namespace

const char* to_string(BoundaryCondition bc) {
    switch (bc) {
        case BoundaryCondition::dirichlet: return "dirichlet";
        case BoundaryCondition::neumann: return "neumann";
        case BoundaryCondition::periodic: return "periodic";
    }
    return "unknown";
}

void TridiagonalOperator::validate() const {
    if (diag.empty()) throw std::invalid_argument("TridiagonalOperator: empty");
    if (offdiag.size() + 1 != diag.size()) throw std::invalid_argument("TridiagonalOperator: offdiag size mismatch");
    if ((bc == BoundaryCondition::periodic) != corner.has_value()) {
        throw std::invalid_argument("TridiagonalOperator: corner present iff periodic");
    }
    if (bc == BoundaryCondition::periodic && diag.size() < 3) {
        throw std::invalid_argument("TridiagonalOperator: periodic needs at least 3 nodes");
    }
}

std::pair<double, double> TridiagonalOperator::gershgorin() const {
    const std::size_t n = size();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(offdiag[i - 1]);
        if (i + 1 < n) r += std::abs(offdiag[i]);
        if (corner && (i == 0 || i == n - 1)) r += std::abs(*corner);
        lo = std::min(lo, diag[i] - r);
        hi = std::max(hi, diag[i] + r);
    }
    return {lo, hi};
}

std::vector<double> TridiagonalOperator::apply(std::span<const double> x) const {
    const std::size_t n = size();
    if (x.size() != n) throw std::invalid_argument("TridiagonalOperator::apply: size mismatch");
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = diag[i] * x[i];
        if (i > 0) acc += offdiag[i - 1] * x[i - 1];
        if (i + 1 < n) acc += offdiag[i] * x[i + 1];
        y[i] = acc;
    }
    if (corner) {
        y[0] += *corner * x[n - 1];
        y[n - 1] += *corner * x[0];
    }
    return y;
}

TridiagonalOperator discretize(std::span<const double> J, double beta, double a, double b, BoundaryCondition bc,
                               LinearTerm linear) {
    if (!(beta > 0.0)) throw std::invalid_argument("discretize: beta must be positive");
    if (!(b > a)) throw std::invalid_argument("discretize: empty interval");
    if (J.size() < 3) throw std::invalid_argument("discretize: need at least two cells");
    const std::size_t n = J.size() - 1;
    const double h = (b - a) / static_cast<double>(n);
    const double sigma = 2.0 / std::sqrt(beta);
    const double inv_h2 = 1.0 / (h * h);
    const bool with_x = linear == LinearTerm::x;
    auto dJ = [&](std::size_t j) { return J[j + 1] - J[j]; };
    auto x_at = [&](std::size_t j) { return with_x ? a + static_cast<double>(j) * h : 0.0; };

    TridiagonalOperator op;
    op.h = h;
    op.bc = bc;
    op.a = a;
    op.b = b;
    switch (bc) {
        case BoundaryCondition::dirichlet: {
            op.diag.resize(n - 1);
            for (std::size_t j = 1; j < n; ++j) {
                op.diag[j - 1] = 2.0 * inv_h2 + sigma * (dJ(j - 1) + dJ(j)) / (2.0 * h) + x_at(j);
            }
            op.offdiag.assign(n - 2, -inv_h2);
            break;
        }
        case BoundaryCondition::periodic: {
            if (n < 3) throw std::invalid_argument("discretize: periodic needs at least three cells");
            op.diag.resize(n);
            op.diag[0] = 2.0 * inv_h2 + sigma * (dJ(n - 1) + dJ(0)) / (2.0 * h) + x_at(0);
            for (std::size_t j = 1; j < n; ++j) {
                op.diag[j] = 2.0 * inv_h2 + sigma * (dJ(j - 1) + dJ(j)) / (2.0 * h) + x_at(j);
            }
            op.offdiag.assign(n - 1, -inv_h2);
            op.corner = -inv_h2;
            break;
        }
        case BoundaryCondition::neumann: {
            // End nodes carry half mass; scaling by M^{-1/2} on both sides keeps the matrix symmetric.
            op.diag.resize(n + 1);
            op.diag[0] = 2.0 * inv_h2 + sigma * dJ(0) / h + x_at(0);
            op.diag[n] = 2.0 * inv_h2 + sigma * dJ(n - 1) / h + x_at(n);
            for (std::size_t j = 1; j < n; ++j) {
                op.diag[j] = 2.0 * inv_h2 + sigma * (dJ(j - 1) + dJ(j)) / (2.0 * h) + x_at(j);
            }
            op.offdiag.assign(n, -inv_h2);
            op.offdiag.front() = -std::sqrt(2.0) * inv_h2;
            op.offdiag.back() = -std::sqrt(2.0) * inv_h2;
            break;
        }
    }
    op.validate();
    return op;
}

TridiagonalOperator discretize(const BrownianPath& path, double beta, double a, double b, BoundaryCondition bc,
                               LinearTerm linear) {
    if (!path.is_node(a) || !path.is_node(b)) {
        throw std::invalid_argument("discretize: interval endpoints must be grid nodes");
    }
    const std::size_t ia = path.node_index(a);
    const std::size_t ib = path.node_index(b);
    if (ib <= ia) throw std::invalid_argument("discretize: empty interval");
    std::span<const double> J(path.values.data() + ia, ib - ia + 1);
    return discretize(J, beta, path.grid.x(ia), path.grid.x(ib), bc, linear);
}

TridiagonalOperator laplacian(double a, double b, std::size_t cells, BoundaryCondition bc) {
    std::vector<double> J(cells + 1, 0.0);
    return discretize(J, 2.0, a, b, bc, LinearTerm::none);
}

TridiagonalOperator airy_operator(double length, double h) {
    if (!(length > 0.0) || !(h > 0.0)) throw std::invalid_argument("airy_operator: bad domain");
    const auto cells = static_cast<std::size_t>(std::llround(length / h));
    std::vector<double> J(cells + 1, 0.0);
    return discretize(J, 2.0, 0.0, static_cast<double>(cells) * h, BoundaryCondition::dirichlet, LinearTerm::x);
}

std::size_t eigen_count(const TridiagonalOperator& op, double lambda) {
    op.validate();
    const double pivmin = pivmin_for(op);
    if (op.bc != BoundaryCondition::periodic) return sturm_open_chain(op, lambda, pivmin);
    double shifted = lambda;
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::size_t negatives = 0;
        if (sturm_periodic(op, shifted, pivmin, negatives)) return negatives;
        shifted += 1e-12 * std::max(1.0, std::abs(lambda)) * std::ldexp(1.0, attempt);
    }
    std::ostringstream msg;
    msg << "eigen_count: unstable periodic inertia at lambda = " << lambda;
    throw std::runtime_error(msg.str());
}

Spectrum lowest_eigenvalues(const TridiagonalOperator& op, std::size_t k) {
    op.validate();
    if (k == 0) throw std::invalid_argument("lowest_eigenvalues: k must be at least 1");
    if (k > op.size()) throw std::invalid_argument("lowest_eigenvalues: k exceeds the matrix dimension");
    auto [gl, gu] = op.gershgorin();
    const double scale = std::max({1.0, std::abs(gl), std::abs(gu)});
    gl -= 1e-9 * scale;
    gu += 1e-9 * scale;
    Spectrum s;
    s.bc = op.bc;
    s.eigenvalues.reserve(k);
    double lower = gl;
    for (std::size_t i = 1; i <= k; ++i) {
        double lo = lower;
        double hi = gu;
        // Invariant: count(lo) < i <= count(hi).
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (eigen_count(op, mid) >= i) {
                hi = mid;
            } else {
                lo = mid;
            }
            if (hi - lo <= 4.0 * DBL_EPSILON * std::max(std::abs(lo), std::abs(hi))) break;
        }
        double value = hi;
        double bound = hi - lo;
        if (op.bc == BoundaryCondition::periodic) {
            // The bordered count is not backward stable next to a double eigenvalue.
            const auto [rho, res] = rayleigh_polish(op, hi);
            if (std::abs(rho - hi) <= 1e-9 * scale) {
                value = rho;
                bound = std::max(bound, res);
            } else {
                bound = std::max(bound, 1e-9 * scale);
            }
        }
        s.eigenvalues.push_back(value);
        s.residual_bound = std::max(s.residual_bound, bound);
        lower = lo;
    }
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end());
    s.n_computed = k;
    return s;
}

double truncated_eigensum(const TridiagonalOperator& op, double r) {
    const std::size_t n = eigen_count(op, r);
    if (n == 0) return 0.0;
    const Spectrum s = lowest_eigenvalues(op, n);
    double acc = 0.0;
    for (double lam : s.eigenvalues) acc += std::max(r - lam, 0.0);
    return acc;
}

double flat_eigenvalue(std::size_t n, double length) {
    if (n == 0) throw std::invalid_argument("flat_eigenvalue: n starts at 1");
    const double k = 2.0 * kPi * static_cast<double>(n / 2) / length;
    return k * k;
}

double flat_bound_rhs(double r, double b_avg, double beta, double length, std::size_t n_max) {
    if (!(length > 0.0) || !(beta > 0.0)) throw std::invalid_argument("flat_bound_rhs: bad parameters");
    const double shifted = r - 2.0 / std::sqrt(beta) * b_avg;
    double acc = 0.0;
    double last = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        last = shifted - flat_eigenvalue(n, length);
        acc += std::max(last, 0.0);
    }
    if (n_max == 0 || last > 0.0) throw std::invalid_argument("flat_bound_rhs: n_max too small");
    return acc;
}

InterlacingReport check_interlacing_chain(std::span<const double> lower, std::span<const double> upper,
                                          double tolerance) {
    if (lower.size() != upper.size()) throw std::invalid_argument("check_interlacing_chain: length mismatch");
    InterlacingReport r;
    r.periodic.assign(lower.begin(), lower.end());
    r.dirichlet.assign(upper.begin(), upper.end());
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lower.size(); ++i) {
        r.worst_margin = std::min(r.worst_margin, upper[i] - lower[i]);
        if (i + 1 < lower.size()) r.worst_margin = std::min(r.worst_margin, lower[i + 1] - upper[i]);
    }
    r.pass = r.worst_margin >= -tolerance;
    return r;
}

InterlacingReport check_interlacing(const BrownianPath& path, double beta, double a, double b, double epsilon,
                                    std::size_t n) {
    const BrownianPath smooth = mollify(path, epsilon);
    const auto per = lowest_eigenvalues(discretize(smooth, beta, a, b, BoundaryCondition::periodic), n);
    const auto dir = lowest_eigenvalues(discretize(smooth, beta, a, b, BoundaryCondition::dirichlet), n);
    const double scale = std::max({1.0, std::abs(dir.eigenvalues.back()), std::abs(per.eigenvalues.front())});
    return check_interlacing_chain(per.eigenvalues, dir.eigenvalues, 1e-8 * scale);
}

ComparisonReport comparison_bound_check(std::span<const double> J1, std::span<const double> J2, double beta,
                                        double a, double b, double kappa, std::size_t n) {
    if (J1.size() != J2.size()) throw std::invalid_argument("comparison_bound_check: potentials differ in size");
    if (!(kappa > 0.0)) throw std::invalid_argument("comparison_bound_check: kappa must be positive");
    const double sigma = 2.0 / std::sqrt(beta);
    ComparisonReport r;
    r.kappa = kappa;
    for (std::size_t j = 0; j < J1.size(); ++j) {
        r.U2 = std::max(r.U2, sigma * std::abs(J2[j]));
        r.U12 = std::max(r.U12, sigma * std::abs(J1[j] - J2[j]));
    }
    const auto s1 = lowest_eigenvalues(discretize(J1, beta, a, b, BoundaryCondition::dirichlet), n);
    const auto s2 = lowest_eigenvalues(discretize(J2, beta, a, b, BoundaryCondition::dirichlet), n);
    const double k3 = kappa * kappa * kappa;
    const double c1 = std::pow(kappa + 1.0, 3) / k3;
    const double c2 = (kappa + 1.0) * (kappa + 1.0) / k3;
    const double additive = c2 * r.U2 * r.U2 + kappa * kappa * r.U12 * r.U12;
    r.min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double lhs = s1.eigenvalues[i];
        const double rhs = c1 * s2.eigenvalues[i] + additive;
        r.lhs.push_back(lhs);
        r.rhs.push_back(rhs);
        r.min_slack = std::min(r.min_slack, rhs - lhs);
        if (rhs - lhs < -1e-9 * std::max(1.0, std::abs(rhs))) r.pass = false;
    }
    return r;
}

VariationalReport eigensum_variational_check(const TridiagonalOperator& op_periodic, std::size_t m, double b_avg,
                                             double beta) {
    if (op_periodic.bc != BoundaryCondition::periodic) {
        throw std::invalid_argument("eigensum_variational_check: operator must be periodic");
    }
    const std::size_t N = op_periodic.size();
    if (m > N) throw std::invalid_argument("eigensum_variational_check: m exceeds dimension");
    VariationalReport r;
    r.m = m;
    if (m == 0) return r;
    const double length = op_periodic.b - op_periodic.a;
    const double sigma = 2.0 / std::sqrt(beta);
    for (double lam : lowest_eigenvalues(op_periodic, m).eigenvalues) r.eigen_sum += lam;
    std::vector<double> f(N);
    for (std::size_t n = 1; n <= m; ++n) {
        const std::size_t k = n / 2;
        for (std::size_t j = 0; j < N; ++j) {
            const double theta = 2.0 * kPi * static_cast<double>(k * j) / static_cast<double>(N);
            if (n == 1) {
                f[j] = 1.0 / std::sqrt(static_cast<double>(N));
            } else if (n % 2 == 0) {
                f[j] = std::sqrt(2.0 / static_cast<double>(N)) * std::cos(theta);
            } else {
                f[j] = std::sqrt(2.0 / static_cast<double>(N)) * std::sin(theta);
            }
        }
        const auto Tf = op_periodic.apply(f);
        double q = 0.0;
        for (std::size_t j = 0; j < N; ++j) q += f[j] * Tf[j];
        r.fourier_sum += q;
        r.flat_sum += flat_eigenvalue(n, length) + sigma * b_avg;
    }
    const double tol = 1e-9 * std::max(1.0, std::abs(r.flat_sum));
    r.pass = r.eigen_sum <= r.fourier_sum + tol && r.eigen_sum <= r.flat_sum + tol;
    return r;
}

AiryCountReport airy_count_bound_check(std::span<const double> lambda_grid, double h) {
    if (lambda_grid.empty()) throw std::invalid_argument("airy_count_bound_check: empty grid");
    double lmax = 0.0;
    for (double lam : lambda_grid) {
        if (lam < 0.0) throw std::invalid_argument("airy_count_bound_check: lambda grid must be non-negative");
        lmax = std::max(lmax, lam);
    }
    const TridiagonalOperator op = airy_operator(lmax + 10.0, h);
    AiryCountReport r;
    r.weyl_constant = 2.0 / (3.0 * kPi);
    const double c = 1.1 * r.weyl_constant;
    r.asymptotic_from = std::pow(0.25 / (0.1 * r.weyl_constant), 2.0 / 3.0);
    for (double lam : lambda_grid) {
        const std::size_t n = eigen_count(op, lam);
        r.lambdas.push_back(lam);
        r.counts.push_back(n);
        const double p = std::pow(lam, 1.5);
        if (p > 0.0) r.fitted_constant = std::max(r.fitted_constant, static_cast<double>(n) / p);
        if (lam == 0.0 && n != 0) r.pass = false;
        if (lam >= r.asymptotic_from && static_cast<double>(n) > c * p) r.pass = false;
    }
    return r;
}

std::string InterlacingReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass;
    j["worst_margin"] = worst_margin;
    j["periodic"] = periodic;
    j["dirichlet"] = dirichlet;
    return j.dump();
}

std::string ComparisonReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass;
    j["kappa"] = kappa;
    j["U2"] = U2;
    j["U12"] = U12;
    j["lhs"] = lhs;
    j["rhs"] = rhs;
    j["min_slack"] = min_slack;
    return j.dump();
}

void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum) {
    out << "index,eigenvalue,bc\n" << std::setprecision(16) << std::scientific;
    for (std::size_t i = 0; i < spectrum.eigenvalues.size(); ++i) {
        out << i + 1 << ',' << spectrum.eigenvalues[i] << ',' << to_string(spectrum.bc) << '\n';
    }
}

}  // namespace airy_ldp

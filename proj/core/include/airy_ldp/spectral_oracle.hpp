#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "airy_ldp/brownian_paths.hpp"

namespace airy_ldp {

enum class BoundaryCondition { dirichlet, neumann, periodic };
enum class LinearTerm { none, x };

const char* to_string(BoundaryCondition bc);

// Symmetric tridiagonal (plus a corner entry for periodic) approximation of
// -d^2/dx^2 + (2/sqrt beta) J' [+ x] on [a, b].
//
// All three boundary conditions come from one assembly: each cell contributes
// (g_{j+1} - g_j)^2 / h to the form and h/2 of mass to both of its nodes, and
// the white-noise increment of the cell is split evenly between the nodes.
// Dirichlet drops the end nodes, periodic identifies them, Neumann keeps both
// (with half mass, symmetrized). The form domains are therefore nested exactly.
struct TridiagonalOperator {
    std::vector<double> diag;
    std::vector<double> offdiag;
    std::optional<double> corner;
    double h = 0.0;
    BoundaryCondition bc = BoundaryCondition::dirichlet;
    double a = 0.0;
    double b = 0.0;

    std::size_t size() const { return diag.size(); }
    void validate() const;
    // Gershgorin enclosure of the spectrum.
    std::pair<double, double> gershgorin() const;
    // y = T x
    std::vector<double> apply(std::span<const double> x) const;
};

// J holds nodal values of the antiderivative at a + k h, k = 0..n, h = (b - a)/n.
TridiagonalOperator discretize(std::span<const double> J, double beta, double a, double b, BoundaryCondition bc,
                               LinearTerm linear = LinearTerm::none);
// Uses the path's own grid; a and b must be grid nodes.
TridiagonalOperator discretize(const BrownianPath& path, double beta, double a, double b, BoundaryCondition bc,
                               LinearTerm linear = LinearTerm::none);
// Zero potential on [a, b] with n cells.
TridiagonalOperator laplacian(double a, double b, std::size_t cells, BoundaryCondition bc);
// -d^2/dx^2 + x on (0, length] with Dirichlet ends.
TridiagonalOperator airy_operator(double length, double h);

// Number of eigenvalues <= lambda, from the inertia of T - lambda.
std::size_t eigen_count(const TridiagonalOperator& op, double lambda);

struct Spectrum {
    std::vector<double> eigenvalues;
    std::size_t n_computed = 0;
    BoundaryCondition bc = BoundaryCondition::dirichlet;
    double residual_bound = 0.0;
};

Spectrum lowest_eigenvalues(const TridiagonalOperator& op, std::size_t k);

// sum_n (r - lambda_n)_+
double truncated_eigensum(const TridiagonalOperator& op, double r);

// lambda*_n = (2 pi floor(n/2) / length)^2, n >= 1.
double flat_eigenvalue(std::size_t n, double length);

// sum_n (r - (2/sqrt beta) b_avg - lambda*_n)_+ over n = 1..n_max.
double flat_bound_rhs(double r, double b_avg, double beta, double length, std::size_t n_max);

struct InterlacingReport {
    bool pass = true;
    std::vector<double> dirichlet;
    std::vector<double> periodic;
    double worst_margin = 0.0;
    std::string to_json() const;
};

// Checks lower[0] <= upper[0] <= lower[1] <= upper[1] <= ... up to tolerance.
InterlacingReport check_interlacing_chain(std::span<const double> lower, std::span<const double> upper,
                                          double tolerance);
// Mollifies the path, then compares the first n periodic and Dirichlet eigenvalues on [a, b].
InterlacingReport check_interlacing(const BrownianPath& path, double beta, double a, double b, double epsilon,
                                    std::size_t n);

struct ComparisonReport {
    bool pass = true;
    double kappa = 1.0;
    double U2 = 0.0;
    double U12 = 0.0;
    std::vector<double> lhs;
    std::vector<double> rhs;
    double min_slack = 0.0;
    std::string to_json() const;
};

// lambda_n(H1) <= ((k+1)^3/k^3) lambda_n(H2) + ((k+1)^2/k^3) U2^2 + k^2 U12^2, n = 1..n,
// Dirichlet on [a, b]. U2 and U12 are sup norms of (2/sqrt beta) J2 and (2/sqrt beta)(J1 - J2).
ComparisonReport comparison_bound_check(std::span<const double> J1, std::span<const double> J2, double beta,
                                        double a, double b, double kappa, std::size_t n);

struct VariationalReport {
    bool pass = true;
    std::size_t m = 0;
    double eigen_sum = 0.0;    // sum_{n<=m} lambda_n(H_T)
    double fourier_sum = 0.0;  // sum_{n<=m} Q(f_n, f_n) with discrete Fourier vectors
    double flat_sum = 0.0;     // sum_{n<=m} (lambda*_n + (2/sqrt beta) b_avg)
};

VariationalReport eigensum_variational_check(const TridiagonalOperator& op_periodic, std::size_t m, double b_avg,
                                             double beta);

struct AiryCountReport {
    bool pass = true;
    double weyl_constant = 0.0;
    double fitted_constant = 0.0;
    double asymptotic_from = 0.0;
    std::vector<double> lambdas;
    std::vector<std::size_t> counts;
};

// Counts eigenvalues of the Airy operator on [0, max lambda + 10] and asserts
// N(lambda) <= 1.1 (2/3pi) lambda^{3/2} on the grid points at or above the
// first lambda where the Weyl offset of 1/4 is covered by the slack.
AiryCountReport airy_count_bound_check(std::span<const double> lambda_grid, double h = 5e-3);

void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum);

}  // namespace airy_ldp

#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "airy_ldp/brownian_paths.hpp"
#include "airy_ldp/model.hpp"

namespace airy_ldp {

enum class PotentialKind { airy, flat };

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// SAO truncation: explosions are counted on [0, lambda_+ + kSaoMargin] and the
// following kSaoMonitorWindow is watched for stray explosions.
inline constexpr double kSaoMargin = 10.0;
inline constexpr double kSaoMonitorWindow = 5.0;

struct RiccatiConfig {
    double beta = 2.0;
    double lambda = 0.0;
    PotentialKind kind = PotentialKind::flat;
    double a = 0.0;
    double b = 1.0;
    double initial_value = kInf;
    // Tail monitor threshold: a solution dipping below -M after monitor_from is reported.
    double explosion_threshold = 1e4;
    // Integration step; 0 means the path grid step. Must not exceed it.
    double step = 0.0;
    // AIRY drift is (linear_slope (x - linear_origin) - lambda).
    double linear_origin = 0.0;
    double linear_slope = 1.0;
    double monitor_from = kInf;
    bool record_states = false;

    void validate() const;
};

// Lexicographic state (explosions so far, f); larger means fewer explosions, then larger f.
struct RiccatiState {
    std::size_t explosions = 0;
    double value = kInf;
};

bool state_geq(const RiccatiState& lhs, const RiccatiState& rhs);

struct RiccatiTrace {
    std::vector<double> explosion_times;
    std::size_t count = 0;
    double terminal_value = kInf;
    double lambda = 0.0;
    double monitor_min = kInf;
    std::vector<double> positions;
    std::vector<RiccatiState> states;
};

class RiccatiError : public std::runtime_error {
public:
    RiccatiError(const std::string& what, double position)
        : std::runtime_error(what), position_(position) {}
    double position() const { return position_; }

private:
    double position_;
};

RiccatiTrace solve_riccati(const BrownianPath& path, const RiccatiConfig& config);

struct SaoCount {
    std::size_t count = 0;
    bool flagged = false;
    double x_stop = 0.0;
    // Lifted Pruefer angle at x_stop, see lifted_phase.
    double phase = 0.0;
};

// pi * explosions + arccot(f), continuous and non-decreasing in lambda for a fixed end point.
double lifted_phase(std::size_t explosions, double f);

// Lifted phase of the AIRY solve from +inf on [0, x_end].
double sao_phase(const BrownianPath& path, double beta, double lambda, double x_end, double step = 0.0);

// Two-sided shooting for the Dirichlet problem of the AIRY operator on [0, x_end]. The backward
// solve from x_end is the forward solve of g(s) = -f(x_end - s) on the reflected path, which
// reproduces the inverse of every integration step exactly.
class DirichletShooting {
public:
    // x_end and x_match must be grid nodes with 0 <= x_match < x_end <= path length.
    DirichletShooting(const BrownianPath& path, double beta, double x_end, double x_match, double step = 0.0);

    // Sum of the forward and backward lifted phases at x_match. Continuous and increasing in
    // lambda; equals k pi exactly at the k-th Dirichlet eigenvalue.
    double phase_sum(double lambda) const;

    double x_end() const { return x_end_; }
    double x_match() const { return x_match_; }

private:
    const BrownianPath* path_;
    BrownianPath reflected_;
    double beta_;
    double x_end_;
    double x_match_;
    double step_;
};

double sao_stop_point(double lambda);
// Minimal path length needed by count_sao at lambda.
double sao_required_length(double lambda);

SaoCount count_sao(const BrownianPath& path, double beta, double lambda, double step = 0.0,
                   double threshold = 1e4);

std::size_t count_hill(const BrownianPath& path, double beta, double lambda, double a, double b,
                       double step = 0.0);

// Explosion counts of one SAO solve bucketed by (x_{i-1}, x_i], plus a trailing
// bucket for (x_{i_*}, x_stop]. Sums to count_sao.
std::vector<std::size_t> localized_counts(const BrownianPath& path, double beta, double lambda,
                                          const Partition& partition);

std::vector<std::size_t> monotone_lambda_scan(const BrownianPath& path, double beta,
                                              std::span<const double> lambdas);

struct CouplingReport {
    bool holds = true;
    std::vector<std::size_t> buckets;
    std::vector<std::size_t> lower;
    std::vector<std::size_t> upper;
};

// Checks hill(lambda - x_i, I_i) <= bucket_i <= hill(lambda - x_{i-1}, I_i) + 1 per interval,
// and the analogous sandwich for the trailing bucket against a restarted SAO solve.
CouplingReport check_localization_coupling(const BrownianPath& path, double beta, double lambda,
                                           const Partition& partition);

void write_trace_csv(std::ostream& out, std::span<const RiccatiTrace> traces);

}  // namespace airy_ldp

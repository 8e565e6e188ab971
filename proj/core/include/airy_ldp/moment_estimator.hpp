#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "airy_ldp/brownian_paths.hpp"
#include "airy_ldp/model.hpp"

namespace airy_ldp {

enum class EstimatorMode { plain, tilted };

const char* to_string(EstimatorMode mode);
EstimatorMode parse_mode(const std::string& text);

// Window in the centred variable lambda - t^{2/3} zeta. NaN picks the default:
// hi = 40 t^{-1/3}, lo = (ground-state bracket) - 8 t^{-1/3} log 10.
struct QuadratureWindow {
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_nodes = 16;
};

struct EstimatorConfig {
    ModelParams params;
    double t = 1.0;
    double alpha = 1.0 / 6.0;
    std::size_t n_samples = 1000;
    EstimatorMode mode = EstimatorMode::plain;
    QuadratureWindow window;
    // Also the grid step of the sampled paths.
    double riccati_step = 1e-2;
    std::uint64_t seed = 0;
    // 0 means hardware concurrency.
    unsigned threads = 0;
    // Root refinement stops once a cell's contribution is known to this absolute accuracy.
    double refine_tolerance = 1e-6;

    void validate() const;
    double shift() const;  // t^{2/3} zeta
    double window_hi() const;
    // Path length that covers every count the statistic may request.
    double path_length() const;
};

struct StatisticResult {
    double value = 0.0;
    double lo = 0.0;  // absolute lambda with zero count
    double hi = 0.0;  // absolute lambda
    std::size_t count_at_hi = 0;
    double tail_remainder = 0.0;
    bool tail_verified = true;
    bool flagged = false;
    std::size_t n_solves = 0;
};

// sum_k w_t(lambda_k - t^{2/3} zeta) = -int N(lambda + t^{2/3} zeta) w_t'(lambda) dlambda.
StatisticResult spectral_statistic(const BrownianPath& path, const EstimatorConfig& config);

struct MomentReport {
    double log_estimate = 0.0;
    double std_error_log = 0.0;
    std::size_t n_samples = 0;
    std::vector<double> per_sample_log_terms;
    std::vector<double> per_sample_log_weights;
    double normalized = 0.0;  // t^{-2} log_estimate
    double ess = 0.0;
    bool std_error_defined = true;
    bool underflow = false;
    std::size_t flagged_samples = 0;
    std::vector<std::string> warnings;

    bool reliable() const { return warnings.empty(); }
};

struct LogMeanExp {
    double log_mean = 0.0;
    double std_error_log = 0.0;
    bool std_error_defined = true;
    bool underflow = false;
};

// log((1/n) sum exp(terms)) with a delta-method standard error, max-shifted.
LogMeanExp log_mean_exp(std::span<const double> terms);
// (sum w)^2 / sum w^2 for w = exp(log_weights).
double effective_sample_size(std::span<const double> log_weights);

MomentReport estimate_plain(const EstimatorConfig& config);
MomentReport estimate_tilted(const EstimatorConfig& config);
MomentReport estimate(const EstimatorConfig& config);

struct ScanRow {
    EstimatorConfig config;
    MomentReport report;
    double target = 0.0;  // -scaled_rate
};

std::vector<ScanRow> convergence_scan(std::span<const EstimatorConfig> configs);

struct DiagnosticReport {
    double normalized = 0.0;  // t^{-2} sum_i log G_i
    double std_error = 0.0;   // of normalized
    std::vector<double> log_G;
    std::vector<double> std_error_log;
    double paired_normalized = 0.0;
    double shuffled_normalized = 0.0;
};

// Independent per-interval Monte Carlo of prod_i E exp(-t^{1/3} L sum_n (t^{2/3} zeta - x_i - lambda_n(H_{I_i}))_+).
DiagnosticReport lower_bound_diagnostic(const EstimatorConfig& config, double hill_step = 1e-3);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn);

}  // namespace airy_ldp

#include "airy_ldp/detail/parallel.hpp"

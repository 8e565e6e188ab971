#include "airy_ldp/moment_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "airy_ldp/cost_function.hpp"
#include "airy_ldp/rate_function.hpp"
#include "airy_ldp/riccati_solver.hpp"
#include "airy_ldp/rng.hpp"
#include "airy_ldp/spectral_oracle.hpp"

namespace airy_ldp {

namespace {

constexpr double kLn10 = 2.302585092994046;
// Streams for the per-interval diagnostic live far away from the sample streams.
constexpr std::uint64_t kDiagnosticStreamBase = 0x5DEECE66DULL << 20;

}  // namespace

const char* to_string(EstimatorMode mode) { return mode == EstimatorMode::plain ? "plain" : "tilted"; }

EstimatorMode parse_mode(const std::string& text) {
    if (text == "plain") return EstimatorMode::plain;
    if (text == "tilted") return EstimatorMode::tilted;
    throw std::invalid_argument("unknown estimator mode '" + text + "' (expected plain or tilted)");
}

void EstimatorConfig::validate() const {
    params.validate();
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("EstimatorConfig: t must be positive");
    check_alpha(alpha);
    if (n_samples == 0) throw std::invalid_argument("EstimatorConfig: n_samples must be positive");
    if (window.n_nodes < 16) throw std::invalid_argument("EstimatorConfig: n_nodes must be at least 16");
    if (!std::isnan(window.lo) && !std::isnan(window.hi) && !(window.lo < window.hi)) {
        throw std::invalid_argument("EstimatorConfig: window lo must be below hi");
    }
    if (!(riccati_step > 0.0) || riccati_step >= 0.5) {
        throw std::invalid_argument("EstimatorConfig: riccati_step must lie in (0, 0.5)");
    }
    if (!(refine_tolerance > 0.0)) throw std::invalid_argument("EstimatorConfig: refine_tolerance must be positive");
}

double EstimatorConfig::shift() const { return std::cbrt(t * t) * params.zeta; }

double EstimatorConfig::window_hi() const {
    return std::isnan(window.hi) ? 40.0 / std::cbrt(t) : window.hi;
}

double EstimatorConfig::path_length() const {
    return sao_required_length(shift() + window_hi()) + riccati_step;
}

StatisticResult spectral_statistic(const BrownianPath& path, const EstimatorConfig& config) {
    config.validate();
    const double c = config.shift();
    const double t = config.t;
    const double beta = config.params.beta;
    const double step = 0.0;  // the path grid step
    StatisticResult res;

    auto count_at = [&](double lam, double* phase) -> std::size_t {
        ++res.n_solves;
        const SaoCount sc = count_sao(path, beta, lam, step);
        res.flagged = res.flagged || sc.flagged;
        if (phase != nullptr) *phase = sc.phase;
        return sc.count;
    };
    auto w = [&](double lam) { return w_t(lam - c, t); };

    res.hi = c + config.window_hi();
    if (path.grid.length < sao_required_length(res.hi) * (1.0 - 1e-12)) {
        throw std::invalid_argument("spectral_statistic: path too short for the quadrature window");
    }

    // Lower end: a lambda with zero count.
    const double margin = 8.0 / std::cbrt(t) * kLn10;
    if (std::isnan(config.window.lo)) {
        double lo = std::min(c, 0.0) - margin;
        double jump = 10.0;
        while (count_at(lo, nullptr) > 0) {
            lo -= jump;
            jump *= 2.0;
            if (jump > 1e6) throw std::runtime_error("spectral_statistic: no ground-state bracket found");
        }
        res.lo = lo;
    } else {
        res.lo = c + config.window.lo;
        if (count_at(res.lo, nullptr) > 0) res.tail_verified = false;
    }
    if (!(res.lo < res.hi)) throw std::invalid_argument("spectral_statistic: empty quadrature window");

    const std::size_t n = config.window.n_nodes;
    std::vector<double> nodes(n);
    std::vector<double> phases(n, 0.0);
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
        nodes[k] = res.lo + (res.hi - res.lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    for (std::size_t k = 1; k < n; ++k) counts[k] = count_at(nodes[k], &phases[k]);

    // Each eigenvalue in a cell where the count jumps is the root of E(lambda) - k pi, with E the
    // shooting phase sum of the Dirichlet problem on [0, x_stop(b)]. Illinois iteration stops once
    // the contribution w(lambda_k) - w(b) is known to refine_tolerance.
    constexpr double pi = 3.14159265358979323846;
    const double h = path.grid.step;
    auto snap = [&](double x) { return h * std::round(x / h); };
    double value = 0.0;
    struct Sample {
        double lam, phase;
    };
    std::vector<Sample> samples;
    for (std::size_t cell = 0; cell + 1 < n; ++cell) {
        const double a = nodes[cell];
        const double b = nodes[cell + 1];
        const double wb = w(b);
        value += static_cast<double>(counts[cell]) * (w(a) - wb);
        if (counts[cell] == counts[cell + 1]) continue;
        const double jumps = static_cast<double>(counts[cell + 1] - counts[cell]);
        if (jumps * (w(a) - wb) <= 2.0 * config.refine_tolerance) {
            value += 0.5 * jumps * (w(a) - wb);
            continue;
        }
        const double x_end = h * std::ceil(sao_stop_point(b) / h - 1e-9);
        const double x_match = std::min(snap(std::clamp(0.5 * (a + b), 0.0, x_end)), x_end - h);
        const DirichletShooting shoot(path, beta, x_end, x_match, step);
        auto phase_at = [&](double lam) {
            ++res.n_solves;
            return shoot.phase_sum(lam);
        };
        samples.clear();
        samples.push_back({a, phase_at(a)});
        samples.push_back({b, phase_at(b)});
        for (std::size_t k = counts[cell] + 1; k <= counts[cell + 1]; ++k) {
            const double target = pi * static_cast<double>(k);
            Sample lo{a, -kInf};
            Sample hi{b, kInf};
            for (const auto& smp : samples) {
                if (smp.phase < target && smp.lam >= lo.lam) lo = smp;
                if (smp.phase >= target && smp.lam <= hi.lam) hi = smp;
            }
            // Counts and shooting disagree only through the end-point margin; treat as an end root.
            if (!std::isfinite(lo.phase) || !std::isfinite(hi.phase)) {
                value += std::isfinite(lo.phase) ? 0.0 : w(a) - wb;
                continue;
            }
            double fa = lo.phase - target;
            double fb = hi.phase - target;
            int side = 0;
            for (int iter = 0; iter < 200; ++iter) {
                if (w(lo.lam) - w(hi.lam) <= config.refine_tolerance) break;
                if (hi.lam - lo.lam <= 1e-13 * std::max(1.0, std::abs(lo.lam))) break;
                double x = (lo.lam * fb - hi.lam * fa) / (fb - fa);
                if (!(x > lo.lam && x < hi.lam)) x = 0.5 * (lo.lam + hi.lam);
                const Sample smp{x, phase_at(x)};
                samples.push_back(smp);
                if (smp.phase < target) {
                    lo = smp;
                    fa = smp.phase - target;
                    if (side == -1) fb *= 0.5;
                    side = -1;
                } else {
                    hi = smp;
                    fb = smp.phase - target;
                    if (side == 1) fa *= 0.5;
                    side = 1;
                }
            }
            const double frac = (target - lo.phase) / (hi.phase - lo.phase);
            value += w(lo.lam + std::clamp(frac, 0.0, 1.0) * (hi.lam - lo.lam)) - wb;
        }
    }

    res.count_at_hi = counts[n - 1];
    value += static_cast<double>(res.count_at_hi) * w(res.hi);
    res.tail_remainder = w(res.hi) * static_cast<double>(res.count_at_hi + 1);
    res.tail_verified = res.tail_verified && res.tail_remainder <= 1e-6;
    res.value = value;
    return res;
}

LogMeanExp log_mean_exp(std::span<const double> terms) {
    if (terms.empty()) throw std::invalid_argument("log_mean_exp: no terms");
    if (std::any_of(terms.begin(), terms.end(), [](double x) { return std::isnan(x); })) {
        throw std::runtime_error("log_mean_exp: non-finite sample term");
    }
    LogMeanExp out;
    const double m = *std::max_element(terms.begin(), terms.end());
    const double n = static_cast<double>(terms.size());
    if (m == -std::numeric_limits<double>::infinity()) {
        out.log_mean = m;
        out.underflow = true;
        out.std_error_defined = false;
        out.std_error_log = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    if (m == std::numeric_limits<double>::infinity()) {
        throw std::runtime_error("log_mean_exp: non-finite sample term");
    }
    double sum = 0.0;
    for (double x : terms) sum += std::exp(x - m);
    const double mean = sum / n;
    out.log_mean = m + std::log(mean);
    if (terms.size() < 2) {
        out.std_error_defined = false;
        out.std_error_log = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double ss = 0.0;
    for (double x : terms) {
        const double d = std::exp(x - m) - mean;
        ss += d * d;
    }
    const double var = ss / (n - 1.0);
    out.std_error_log = std::sqrt(var / n) / mean;
    return out;
}

double effective_sample_size(std::span<const double> log_weights) {
    if (log_weights.empty()) return 0.0;
    const double m = *std::max_element(log_weights.begin(), log_weights.end());
    if (!std::isfinite(m)) return 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (double x : log_weights) {
        const double w = std::exp(x - m);
        s1 += w;
        s2 += w * w;
    }
    return s1 * s1 / s2;
}

namespace {

MomentReport run_estimator(const EstimatorConfig& config, bool tilted) {
    config.validate();
    const PathGrid grid = make_grid(config.riccati_step, config.path_length());
    DriftProfile drift;
    if (tilted) drift = tilt_profile(config.t, config.alpha, config.params);
    const std::size_t n = config.n_samples;

    MomentReport rep;
    rep.n_samples = n;
    rep.per_sample_log_terms.assign(n, 0.0);
    rep.per_sample_log_weights.assign(n, 0.0);
    std::vector<char> flagged(n, 0);

    parallel_for(n, config.threads, [&](std::size_t s) {
        BrownianPath path = sample_path(grid, config.seed, s);
        double log_w = 0.0;
        if (tilted) {
            path = add_drift(path, drift);
            log_w = girsanov_log_weight(path, drift);
        }
        const StatisticResult stat = spectral_statistic(path, config);
        rep.per_sample_log_weights[s] = log_w;
        rep.per_sample_log_terms[s] = log_w - config.params.L * stat.value;
        flagged[s] = static_cast<char>(stat.flagged || !stat.tail_verified);
    });

    rep.flagged_samples = static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), 1));
    const LogMeanExp agg = log_mean_exp(rep.per_sample_log_terms);
    rep.log_estimate = agg.log_mean;
    rep.std_error_log = agg.std_error_log;
    rep.std_error_defined = agg.std_error_defined;
    rep.underflow = agg.underflow;
    rep.normalized = rep.log_estimate / (config.t * config.t);
    rep.ess = effective_sample_size(rep.per_sample_log_weights);

    if (rep.underflow) rep.warnings.emplace_back("all samples underflowed");
    if (!rep.std_error_defined) rep.warnings.emplace_back("standard error undefined");
    if (rep.ess < 10.0) rep.warnings.emplace_back("effective sample size below 10");
    if (rep.flagged_samples > 0) {
        std::ostringstream msg;
        msg << rep.flagged_samples << " samples with tail-monitor or window flags";
        rep.warnings.push_back(msg.str());
    }
    return rep;
}

}  // namespace

MomentReport estimate_plain(const EstimatorConfig& config) { return run_estimator(config, false); }

MomentReport estimate_tilted(const EstimatorConfig& config) {
    if (config.mode != EstimatorMode::tilted) throw std::invalid_argument("estimate_tilted: mode must be tilted");
    return run_estimator(config, true);
}

MomentReport estimate(const EstimatorConfig& config) {
    return config.mode == EstimatorMode::tilted ? estimate_tilted(config) : estimate_plain(config);
}

std::vector<ScanRow> convergence_scan(std::span<const EstimatorConfig> configs) {
    std::vector<ScanRow> rows;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (i > 0 && !(configs[i].t > configs[i - 1].t)) {
            throw std::invalid_argument("convergence_scan: t values must be increasing");
        }
        const auto& a = configs[i].params;
        const auto& b = configs.front().params;
        if (a.beta != b.beta || a.L != b.L || a.zeta != b.zeta || configs[i].alpha != configs.front().alpha) {
            throw std::invalid_argument("convergence_scan: beta, L, zeta and alpha must be shared");
        }
    }
    for (const auto& cfg : configs) {
        EstimatorConfig c = cfg;
        c.mode = EstimatorMode::tilted;
        ScanRow row;
        row.config = c;
        row.report = estimate_tilted(c);
        row.target = -scaled_rate(c.params);
        rows.push_back(std::move(row));
    }
    return rows;
}

DiagnosticReport lower_bound_diagnostic(const EstimatorConfig& config, double hill_step) {
    config.validate();
    if (!(hill_step > 0.0)) throw std::invalid_argument("lower_bound_diagnostic: hill_step must be positive");
    const Partition part = make_partition(config.t, config.alpha, config.params.zeta);
    const std::size_t intervals = part.n_intervals();
    const std::size_t n = config.n_samples;
    const double width = part.points[1];
    const double scale = std::cbrt(config.t) * config.params.L;
    const double c = config.shift();
    const PathGrid grid = make_grid(width / std::max(2.0, std::round(width / hill_step)), width);

    // terms[i * n + s] = -t^{1/3} L sum_n (r_i - lambda_n(H_{I_i}))_+ for sample s.
    std::vector<double> terms(intervals * n, 0.0);
    parallel_for(intervals * n, config.threads, [&](std::size_t idx) {
        const std::size_t i = idx / n;
        const std::size_t s = idx % n;
        const double r = c - part.points[i + 1];
        const BrownianPath path = sample_path(grid, config.seed, kDiagnosticStreamBase + idx);
        const TridiagonalOperator op = discretize(path, config.params.beta, 0.0, grid.length,
                                                  BoundaryCondition::dirichlet);
        if (r < op.gershgorin().first) return;
        terms[i * n + s] = -scale * truncated_eigensum(op, r);
    });

    DiagnosticReport rep;
    const double t2 = config.t * config.t;
    double var = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < intervals; ++i) {
        const LogMeanExp agg = log_mean_exp(std::span<const double>(terms.data() + i * n, n));
        rep.log_G.push_back(agg.log_mean);
        rep.std_error_log.push_back(agg.std_error_log);
        total += agg.log_mean;
        var += agg.std_error_log * agg.std_error_log;
    }
    rep.normalized = total / t2;
    rep.std_error = std::sqrt(var) / t2;

    auto joint = [&](const std::vector<std::vector<std::size_t>>& pairing) {
        std::vector<double> sums(n, 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t i = 0; i < intervals; ++i) sums[s] += terms[i * n + pairing[i][s]];
        }
        return log_mean_exp(sums).log_mean / t2;
    };
    std::vector<std::vector<std::size_t>> pairing(intervals, std::vector<std::size_t>(n));
    for (auto& p : pairing) std::iota(p.begin(), p.end(), std::size_t{0});
    rep.paired_normalized = joint(pairing);
    auto engine = make_engine(config.seed, kDiagnosticStreamBase - 1);
    for (std::size_t i = 1; i < intervals; ++i) std::shuffle(pairing[i].begin(), pairing[i].end(), engine);
    rep.shuffled_normalized = joint(pairing);
    return rep;
}

}  // namespace airy_ldp

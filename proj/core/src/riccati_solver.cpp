#include "airy_ldp/riccati_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace airy_ldp {

namespace {

constexpr double kNodeTolerance = 1e-9;

// The state lives in one of two charts: f itself while |f| <= K, and u = 1/f
// otherwise, with K = 1/(4 step) so that the exact quadratic flow never
// divides by a small number. Blow-down to -inf followed by the restart at +inf
// is u crossing zero from below, so no cut-off is needed.
struct ChartState {
    bool in_u = true;
    double v = 0.0;
    double K = 1.0;

    void normalize() {
        if (std::abs(v) > (in_u ? 1.0 / K : K)) {
            v = 1.0 / v;
            in_u = !in_u;
        }
    }

    double value() const {
        if (!in_u) return v;
        return v == 0.0 ? kInf : 1.0 / v;
    }

    // f -> f + d
    void kick(double d) {
        if (!in_u) {
            v += d;
        } else {
            const double du = d * v;
            if (std::abs(du) < 0.5) {
                v /= 1.0 + du;
            } else {
                v = 1.0 / v + d;
                in_u = false;
            }
        }
        normalize();
    }

    // Exact flow of f' = -f^2 over time len. Returns the time to blow-down if
    // it happens within len, otherwise a negative number.
    double flow(double len) {
        double hit = -1.0;
        if (!in_u) {
            v /= 1.0 + v * len;
        } else {
            const double next = v + len;
            if (v < 0.0 && next >= 0.0) hit = -v;
            v = next;
        }
        normalize();
        return hit;
    }

    // Strang step: half translation, quadratic flow, half translation.
    double strang(double d, double len) {
        kick(0.5 * d);
        const double hit = flow(len);
        kick(0.5 * d);
        return hit;
    }
};

ChartState initial_state(double f0, double step) {
    ChartState s;
    s.K = 0.25 / step;
    if (f0 == kInf) {
        s.in_u = true;
        s.v = 0.0;
    } else {
        s.in_u = false;
        s.v = f0;
        s.normalize();
    }
    return s;
}

}  // namespace

void RiccatiConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("RiccatiConfig: beta must be positive");
    if (!std::isfinite(lambda)) throw std::invalid_argument("RiccatiConfig: lambda must be finite");
    if (!(b > a)) throw std::invalid_argument("RiccatiConfig: interval must be non-empty");
    if (!(explosion_threshold >= 100.0)) throw std::invalid_argument("RiccatiConfig: explosion threshold must be >= 100");
    if (step < 0.0) throw std::invalid_argument("RiccatiConfig: step must be non-negative");
    if (std::isnan(initial_value) || initial_value == -kInf) {
        throw std::invalid_argument("RiccatiConfig: initial value must be finite or +inf");
    }
}

bool state_geq(const RiccatiState& lhs, const RiccatiState& rhs) {
    if (lhs.explosions != rhs.explosions) return lhs.explosions < rhs.explosions;
    return lhs.value >= rhs.value;
}

RiccatiTrace solve_riccati(const BrownianPath& path, const RiccatiConfig& config) {
    config.validate();
    const double h = path.grid.step;
    const double tol = kNodeTolerance * h;
    if (config.a < -tol || config.b > path.grid.length + tol) {
        throw std::invalid_argument("solve_riccati: interval outside path domain");
    }
    const double step = config.step == 0.0 ? h : config.step;
    if (step > h * (1.0 + 1e-12)) throw std::invalid_argument("solve_riccati: step exceeds the path grid step");
    if (step >= 0.5) throw std::invalid_argument("solve_riccati: step too coarse");

    const double sigma = 2.0 / std::sqrt(config.beta);
    const bool airy = config.kind == PotentialKind::airy;
    const double slope = config.linear_slope;
    const double origin = config.linear_origin;

    RiccatiTrace trace;
    trace.lambda = config.lambda;
    ChartState s = initial_state(config.initial_value, step);

    if (config.record_states) {
        trace.positions.push_back(config.a);
        trace.states.push_back({0, s.value()});
    }

    auto after_segment = [&](double q) {
        if (std::isnan(s.v)) {
            std::ostringstream msg;
            msg << "solve_riccati: integration failure at x = " << q;
            throw RiccatiError(msg.str(), q);
        }
        if (q > config.monitor_from) trace.monitor_min = std::min(trace.monitor_min, s.value());
        if (config.record_states) {
            trace.positions.push_back(q);
            trace.states.push_back({trace.explosion_times.size(), s.value()});
        }
    };

    auto advance = [&](double p, double q, double dB) {
        const double len = q - p;
        if (len <= 0.0) return;
        const auto m = static_cast<std::size_t>(std::ceil(len / step - 1e-9));
        const double sub = len / static_cast<double>(m);
        const double sub_dB = dB / static_cast<double>(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double x0 = p + static_cast<double>(k) * sub;
            const double drift = airy ? (slope * (x0 + 0.5 * sub - origin) - config.lambda) * sub : -config.lambda * sub;
            const double hit = s.strang(drift + sigma * sub_dB, sub);
            if (hit >= 0.0) trace.explosion_times.push_back(x0 + hit);
        }
        after_segment(q);
    };

    const auto last_node = static_cast<double>(path.grid.n_points - 1);
    const auto k0 = static_cast<std::size_t>(std::clamp(std::ceil(config.a / h - kNodeTolerance), 0.0, last_node));
    const auto k1 = static_cast<std::size_t>(std::clamp(std::floor(config.b / h + kNodeTolerance), 0.0, last_node));
    const double* B = path.values.data();

    double pos = config.a;
    double B_pos = path.is_node(config.a) ? B[k0] : path.at(config.a);
    if (k0 <= k1 && path.grid.x(k0) > config.a + tol) {
        advance(pos, path.grid.x(k0), B[k0] - B_pos);
        pos = path.grid.x(k0);
        B_pos = B[k0];
    }
    const bool one_substep = step >= h * (1.0 - 1e-9);
    const bool per_node_work = config.record_states || config.monitor_from < config.b;
    if (one_substep && !per_node_work) {
        // Consecutive half translations are merged into one.
        const double flat_drift = -config.lambda * h;
        auto cell_shift = [&](std::size_t k) {
            const double drift =
                airy ? (slope * (path.grid.x(k) + 0.5 * h - origin) - config.lambda) * h : flat_drift;
            return drift + sigma * (B[k + 1] - B[k]);
        };
        if (k1 > k0) {
            double d = cell_shift(k0);
            s.kick(0.5 * d);
            for (std::size_t k = k0; k < k1; ++k) {
                const double hit = s.flow(h);
                if (hit >= 0.0) trace.explosion_times.push_back(path.grid.x(k) + hit);
                if (k + 1 < k1) {
                    const double next = cell_shift(k + 1);
                    s.kick(0.5 * (d + next));
                    d = next;
                } else {
                    s.kick(0.5 * d);
                }
            }
            after_segment(path.grid.x(k1));
        }
    } else {
        for (std::size_t k = k0; k < k1; ++k) {
            advance(path.grid.x(k), path.grid.x(k + 1), B[k + 1] - B[k]);
        }
    }
    if (k0 <= k1) {
        pos = path.grid.x(k1);
        B_pos = B[k1];
    }
    if (config.b > pos + tol) advance(pos, config.b, path.at(config.b) - B_pos);

    trace.count = trace.explosion_times.size();
    trace.terminal_value = s.value();
    return trace;
}

double sao_stop_point(double lambda) { return std::max(0.0, lambda) + kSaoMargin; }

double sao_required_length(double lambda) { return sao_stop_point(lambda) + kSaoMonitorWindow; }

namespace {

constexpr double kPi = 3.14159265358979323846;

RiccatiConfig sao_config(double beta, double lambda, double a, double b, double step, double threshold) {
    RiccatiConfig cfg;
    cfg.beta = beta;
    cfg.lambda = lambda;
    cfg.kind = PotentialKind::airy;
    cfg.a = a;
    cfg.b = b;
    cfg.step = step;
    cfg.explosion_threshold = threshold;
    return cfg;
}

// Solves on [0, x_stop] and then continues through the monitor window.
RiccatiTrace solve_sao(const BrownianPath& path, double beta, double lambda, double step, double threshold,
                       double* phase = nullptr) {
    const double x_stop = sao_stop_point(lambda);
    const double end = x_stop + kSaoMonitorWindow;
    if (path.grid.length < end * (1.0 - 1e-12)) {
        std::ostringstream msg;
        msg << "count_sao: path length " << path.grid.length << " shorter than required " << end;
        throw std::invalid_argument(msg.str());
    }
    RiccatiTrace main = solve_riccati(path, sao_config(beta, lambda, 0.0, x_stop, step, threshold));
    if (phase != nullptr) *phase = lifted_phase(main.count, main.terminal_value);
    RiccatiConfig tail = sao_config(beta, lambda, x_stop, end, step, threshold);
    tail.initial_value = main.terminal_value;
    tail.monitor_from = x_stop;
    const RiccatiTrace rest = solve_riccati(path, tail);
    main.explosion_times.insert(main.explosion_times.end(), rest.explosion_times.begin(), rest.explosion_times.end());
    main.count = main.explosion_times.size();
    main.terminal_value = rest.terminal_value;
    main.monitor_min = rest.monitor_min;
    return main;
}

std::size_t count_up_to(const std::vector<double>& times, double x) {
    return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), x) - times.begin());
}

}  // namespace

double lifted_phase(std::size_t explosions, double f) {
    return kPi * static_cast<double>(explosions) + (0.5 * kPi - std::atan(f));
}

double sao_phase(const BrownianPath& path, double beta, double lambda, double x_end, double step) {
    const RiccatiTrace trace = solve_riccati(path, sao_config(beta, lambda, 0.0, x_end, step, 1e4));
    return lifted_phase(trace.count, trace.terminal_value);
}

DirichletShooting::DirichletShooting(const BrownianPath& path, double beta, double x_end, double x_match,
                                     double step)
    : path_(&path), beta_(beta), x_end_(x_end), x_match_(x_match), step_(step) {
    if (!(beta > 0.0)) throw std::invalid_argument("DirichletShooting: beta must be positive");
    if (!path.is_node(x_end) || !path.is_node(x_match) || !(x_match >= 0.0 && x_match < x_end)) {
        throw std::invalid_argument("DirichletShooting: x_end and x_match must be grid nodes with x_match < x_end");
    }
    const std::size_t n_end = path.node_index(x_end);
    std::vector<double> values(n_end + 1);
    for (std::size_t j = 0; j <= n_end; ++j) values[j] = path.values[n_end] - path.values[n_end - j];
    PathGrid grid = path.grid;
    grid.n_points = n_end + 1;
    grid.length = path.grid.x(n_end);
    reflected_ = path_from_values(grid, std::move(values));
}

double DirichletShooting::phase_sum(double lambda) const {
    double forward = 0.0;
    if (x_match_ > 0.0) {
        forward = sao_phase(*path_, beta_, lambda, x_match_, step_);
    }
    RiccatiConfig cfg = sao_config(beta_, lambda, 0.0, x_end_ - x_match_, step_, 1e4);
    cfg.linear_slope = -1.0;
    cfg.linear_origin = x_end_;
    const RiccatiTrace back = solve_riccati(reflected_, cfg);
    return forward + lifted_phase(back.count, back.terminal_value);
}

SaoCount count_sao(const BrownianPath& path, double beta, double lambda, double step, double threshold) {
    SaoCount out;
    const RiccatiTrace trace = solve_sao(path, beta, lambda, step, threshold, &out.phase);
    out.x_stop = sao_stop_point(lambda);
    out.count = count_up_to(trace.explosion_times, out.x_stop);
    out.flagged = out.count != trace.count || trace.monitor_min < -threshold;
    return out;
}

std::size_t count_hill(const BrownianPath& path, double beta, double lambda, double a, double b, double step) {
    RiccatiConfig cfg;
    cfg.beta = beta;
    cfg.lambda = lambda;
    cfg.kind = PotentialKind::flat;
    cfg.a = a;
    cfg.b = b;
    cfg.step = step;
    return solve_riccati(path, cfg).count;
}

std::vector<std::size_t> localized_counts(const BrownianPath& path, double beta, double lambda,
                                          const Partition& partition) {
    partition.validate();
    const RiccatiTrace trace = solve_sao(path, beta, lambda, 0.0, 1e4);
    const double x_stop = sao_stop_point(lambda);
    std::vector<std::size_t> buckets(partition.n_buckets(), 0);
    for (double x : trace.explosion_times) {
        if (x > x_stop) break;
        const auto it = std::lower_bound(partition.points.begin() + 1, partition.points.end(), x);
        const auto idx = static_cast<std::size_t>(it - (partition.points.begin() + 1));
        ++buckets[idx];
    }
    return buckets;
}

std::vector<std::size_t> monotone_lambda_scan(const BrownianPath& path, double beta,
                                              std::span<const double> lambdas) {
    if (!std::is_sorted(lambdas.begin(), lambdas.end())) {
        throw std::invalid_argument("monotone_lambda_scan: lambdas must be sorted ascending");
    }
    std::vector<std::size_t> counts;
    counts.reserve(lambdas.size());
    for (double lam : lambdas) counts.push_back(count_sao(path, beta, lam).count);
    return counts;
}

CouplingReport check_localization_coupling(const BrownianPath& path, double beta, double lambda,
                                           const Partition& partition) {
    CouplingReport r;
    r.buckets = localized_counts(path, beta, lambda, partition);
    const std::size_t n = partition.n_intervals();
    for (std::size_t i = 1; i <= n; ++i) {
        const double lo = partition.points[i - 1];
        const double hi = partition.points[i];
        r.lower.push_back(count_hill(path, beta, lambda - hi, lo, hi));
        r.upper.push_back(count_hill(path, beta, lambda - lo, lo, hi) + 1);
    }
    const double tail_start = partition.points.back();
    const double x_stop = sao_stop_point(lambda);
    std::size_t restarted = 0;
    if (tail_start < x_stop) {
        RiccatiConfig cfg;
        cfg.beta = beta;
        cfg.lambda = lambda;
        cfg.kind = PotentialKind::airy;
        cfg.a = tail_start;
        cfg.b = x_stop;
        restarted = solve_riccati(path, cfg).count;
    }
    r.lower.push_back(restarted);
    r.upper.push_back(restarted + 1);
    for (std::size_t i = 0; i < r.buckets.size(); ++i) {
        if (r.buckets[i] < r.lower[i] || r.buckets[i] > r.upper[i]) r.holds = false;
    }
    return r;
}

void write_trace_csv(std::ostream& out, std::span<const RiccatiTrace> traces) {
    out << "lambda,explosion_time\n" << std::setprecision(16) << std::scientific;
    for (const auto& t : traces) {
        for (double x : t.explosion_times) out << t.lambda << ',' << x << '\n';
    }
    for (const auto& t : traces) {
        out << "# summary,lambda=" << t.lambda << ",count=" << t.count << ",terminal=" << t.terminal_value << '\n';
    }
}

}  // namespace airy_ldp

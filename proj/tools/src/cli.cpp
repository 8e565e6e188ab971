#include "airy_ldp/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "airy_ldp/brownian_paths.hpp"
#include "airy_ldp/cost_function.hpp"
#include "airy_ldp/model.hpp"
#include "airy_ldp/moment_estimator.hpp"
#include "airy_ldp/rate_function.hpp"
#include "airy_ldp/riccati_solver.hpp"
#include "airy_ldp/spectral_oracle.hpp"

namespace airy_ldp::cli {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = std::numbers::pi;
// First eigenvalue of airy_operator(40, 5e-3).
constexpr double kAiryGroundState = 2.3381051327;

struct Options {
    double beta = 2.0;
    double L = 1.0;
    double zeta = 1.0;
    double t = 1.0;
    std::vector<double> t_list{1.0, 2.0, 4.0};
    double alpha = 1.0 / 6.0;
    std::size_t n = 1000;
    std::string mode = "plain";
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out;
    std::string format = "csv";
    std::string suite = "all";
    std::string zeta_grid = "0:2:0.1";
    double lambda_lo = kNaN;
    double lambda_hi = kNaN;
    double h = kNaN;
    std::string config;
    std::string dump_paths;

    ModelParams params() const {
        ModelParams p{beta, L, zeta};
        p.validate();
        return p;
    }
    double h_or(double fallback) const { return std::isnan(h) ? fallback : h; }
};

std::string num(double x) {
    std::ostringstream s;
    s << std::setprecision(16) << std::scientific << x;
    return s.str();
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    void write(std::ostream& out, const std::string& format) const {
        if (format == "json") {
            json arr = json::array();
            for (const auto& row : rows) {
                json obj;
                for (std::size_t k = 0; k < columns.size(); ++k) obj[columns[k]] = row[k];
                arr.push_back(obj);
            }
            out << arr.dump(2) << '\n';
            return;
        }
        for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k];
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (k) out << ',';
                const json& v = row[k];
                if (v.is_number_float()) {
                    out << num(v.get<double>());
                } else if (v.is_string()) {
                    out << v.get<std::string>();
                } else if (v.is_null()) {
                    out << "nan";
                } else {
                    out << v.dump();
                }
            }
            out << '\n';
        }
    }
};

// Non-finite doubles become null in JSON and "nan"/"inf" in CSV.
json real(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return nullptr;
    return x > 0 ? "inf" : "-inf";
}

class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (path.empty()) return;
        file_.open(path, std::ios::out | std::ios::trunc);
        if (!file_) throw std::runtime_error("cannot open output file '" + path + "'");
        stream_ = &file_;
        to_file_ = true;
    }
    std::ostream& stream() { return *stream_; }
    bool to_file() const { return to_file_; }
    void close() {
        if (!to_file_) return;
        file_.close();
        if (!file_) throw std::runtime_error("failed writing output file");
    }

private:
    std::ofstream file_;
    std::ostream* stream_;
    bool to_file_ = false;
};

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        std::size_t used = 0;
        parts.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument("bad --zeta-grid value '" + text + "'");
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
        throw std::invalid_argument("--zeta-grid expects start:stop:step with step > 0 and stop >= start");
    }
    const auto count = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1;
    std::vector<double> grid;
    for (std::size_t k = 0; k < count; ++k) grid.push_back(parts[0] + static_cast<double>(k) * parts[2]);
    return grid;
}

EstimatorConfig estimator_config(const Options& o, double t) {
    EstimatorConfig c;
    c.params = o.params();
    c.t = t;
    c.alpha = o.alpha;
    c.n_samples = o.n;
    c.mode = parse_mode(o.mode);
    c.window.lo = o.lambda_lo;
    c.window.hi = o.lambda_hi;
    c.riccati_step = o.h_or(1e-2);
    c.seed = o.seed;
    c.threads = o.threads;
    c.validate();
    return c;
}

const std::vector<std::string> kEstimateColumns{"t", "alpha", "beta", "L", "zeta", "mode", "n", "log_G",
                                                "t2_log_G", "stderr", "ess", "target"};

std::vector<json> estimate_row(const EstimatorConfig& c, const MomentReport& r) {
    return {real(c.t),
            real(c.alpha),
            real(c.params.beta),
            real(c.params.L),
            real(c.params.zeta),
            to_string(c.mode),
            c.n_samples,
            real(r.log_estimate),
            real(r.normalized),
            real(r.std_error_log),
            real(r.ess),
            real(-scaled_rate(c.params))};
}

void dump_first_path(const Options& o, const EstimatorConfig& c) {
    if (o.dump_paths.empty()) return;
    BrownianPath path = sample_path(make_grid(c.riccati_step, c.path_length()), c.seed, 0);
    if (c.mode == EstimatorMode::tilted) path = add_drift(path, tilt_profile(c.t, c.alpha, c.params));
    std::ofstream file(o.dump_paths);
    if (!file) throw std::runtime_error("cannot open path dump file '" + o.dump_paths + "'");
    write_path_csv(file, path);
}

// ----- validate suites -----

struct Check {
    std::string name;
    bool pass = true;
    json detail;
};

Check check_hill_vs_oracle(std::uint64_t seed) {
    const PathGrid g = make_grid(1e-3, 2.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lam(-20.0, 200.0);
    const int trials = 50;
    int exact = 0;
    int within_one = 0;
    for (int i = 0; i < trials; ++i) {
        const BrownianPath p = sample_path(g, seed, static_cast<std::uint64_t>(i));
        const double l = lam(rng);
        const auto a = static_cast<long>(count_hill(p, 2.0, l, 0.0, 2.0));
        const auto b = static_cast<long>(eigen_count(discretize(p, 2.0, 0.0, 2.0, BoundaryCondition::dirichlet), l));
        exact += a == b ? 1 : 0;
        within_one += std::abs(a - b) <= 1 ? 1 : 0;
    }
    Check c{"riccati_vs_oracle", within_one >= 0.95 * trials && exact >= 0.8 * trials, {}};
    c.detail = {{"trials", trials}, {"exact", exact}, {"within_one", within_one}};
    return c;
}

Check check_flat_closed_form(std::uint64_t seed) {
    const BrownianPath z = zero_path(make_grid(1e-3, 5.0));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> len(0.2, 5.0);
    std::uniform_real_distribution<double> lam(-5.0, 400.0);
    int done = 0;
    int failures = 0;
    while (done < 20) {
        const double l = std::round(len(rng) * 1000.0) / 1000.0;
        const double lambda = lam(rng);
        const double q = l * std::sqrt(std::max(lambda, 0.0)) / kPi;
        if (lambda > 0.0 && std::abs(q - std::round(q)) < 0.02) continue;
        failures += count_hill(z, 2.0, lambda, 0.0, l) == static_cast<std::size_t>(std::floor(q)) ? 0 : 1;
        ++done;
    }
    return {"flat_closed_form", failures == 0, {{"trials", done}, {"failures", failures}}};
}

Check check_coupling(std::uint64_t seed) {
    const PathGrid g = make_grid(1e-2, 40.0);
    const Partition part = make_partition(4.0, 0.0, 1.5);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lam(-2.0, 10.0);
    int failures = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        failures += check_localization_coupling(sample_path(g, seed, s), 2.0, lam(rng), part).holds ? 0 : 1;
    }
    return {"localization_coupling", failures == 0, {{"trials", 20}, {"failures", failures}}};
}

Check check_monotone_scan(std::uint64_t seed) {
    const PathGrid g = make_grid(1e-2, 40.0);
    std::vector<double> lambdas;
    for (int k = 0; k < 60; ++k) lambdas.push_back(-8.0 + 0.4 * k);
    int failures = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto counts = monotone_lambda_scan(sample_path(g, seed, s), 2.0, lambdas);
        failures += std::is_sorted(counts.begin(), counts.end()) ? 0 : 1;
    }
    return {"monotone_in_lambda", failures == 0, {{"paths", 5}, {"failures", failures}}};
}

Check check_dirichlet_laplacian() {
    const Spectrum s = lowest_eigenvalues(laplacian(0.0, 1.0, 1000, BoundaryCondition::dirichlet), 5);
    double worst = 0.0;
    for (std::size_t k = 1; k <= 5; ++k) {
        const double exact = static_cast<double>(k * k) * kPi * kPi;
        worst = std::max(worst, std::abs(s.eigenvalues[k - 1] - exact) / exact);
    }
    return {"dirichlet_laplacian", worst <= 1e-3, {{"worst_relative_error", worst}}};
}

Check check_airy_ground_state() {
    const double e = lowest_eigenvalues(airy_operator(40.0, 5e-3), 1).eigenvalues[0];
    const double rel = std::abs(e - kAiryGroundState) / kAiryGroundState;
    return {"airy_ground_state", rel <= 1e-9, {{"eigenvalue", e}, {"frozen", kAiryGroundState}}};
}

std::vector<double> random_J(std::mt19937_64& rng, std::size_t cells) {
    std::normal_distribution<double> g(0.0, std::sqrt(1.0 / static_cast<double>(cells)));
    std::vector<double> J(cells + 1, 0.0);
    for (std::size_t j = 1; j <= cells; ++j) J[j] = J[j - 1] + g(rng);
    return J;
}

Check check_comparison(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int failures = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 20; ++trial) {
        const auto J1 = random_J(rng, 400);
        const auto J2 = random_J(rng, 400);
        for (double kappa : {1.0, 2.0, 8.0}) {
            const ComparisonReport r = comparison_bound_check(J1, J2, 2.0, 0.0, 1.0, kappa, 10);
            failures += r.pass ? 0 : 1;
            min_slack = std::min(min_slack, r.min_slack);
        }
    }
    return {"comparison_inequality", failures == 0, {{"trials", 60}, {"failures", failures}, {"min_slack", min_slack}}};
}

Check check_flat_domination(std::uint64_t seed) {
    const PathGrid g = make_grid(1e-3, 1.0);
    int failures = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const BrownianPath p = sample_path(g, seed, s);
        const TridiagonalOperator op = discretize(p, 2.0, 0.0, 1.0, BoundaryCondition::periodic);
        const double b_avg = p.values.back() - p.values.front();
        for (std::size_t m = 0; m <= 10; ++m) failures += eigensum_variational_check(op, m, b_avg, 2.0).pass ? 0 : 1;
        for (double r : {0.0, 30.0, 150.0}) {
            failures += truncated_eigensum(op, r) >= flat_bound_rhs(r, b_avg, 2.0, 1.0, 40) - 1e-9 ? 0 : 1;
        }
    }
    return {"flat_domination", failures == 0, {{"paths", 20}, {"failures", failures}}};
}

Check check_interlacing_sweep(std::uint64_t seed) {
    const PathGrid g = make_grid(1e-3, 1.0);
    int failures = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (std::uint64_t s = 0; s < 100; ++s) {
        const InterlacingReport r = check_interlacing(sample_path(g, seed, s), 2.0, 0.0, 1.0, 0.01, 10);
        failures += r.pass ? 0 : 1;
        worst = std::min(worst, r.worst_margin);
    }
    return {"interlacing", failures == 0, {{"paths", 100}, {"failures", failures}, {"worst_margin", worst}}};
}

Check check_objective_identity(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 4.0);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const ModelParams p{u(rng), u(rng), u(rng)};
        const double exact = scaled_rate(p);
        worst = std::max(worst, std::abs(objective(sample_v_star(p, p.zeta, 10000), p) - exact) / exact);
    }
    return {"objective_at_v_star", worst <= 1e-6, {{"triples", 20}, {"worst_relative_error", worst}}};
}

Check check_minimizer() {
    const ModelParams p{2.0, 1.0, 1.0};
    const Control c = minimize_objective(p, 1000);
    double sup = 0.0;
    for (std::size_t k = 0; k < c.values.size(); ++k) {
        sup = std::max(sup, std::abs(c.values[k] - v_star(0.5 * (c.grid[k] + c.grid[k + 1]), p)));
    }
    return {"minimizer_recovers_v_star", sup <= 1e-3, {{"sup_error", sup}}};
}

Check check_phi_laws() {
    const double h = 1e-5;
    const double third = (phi(0.0) - 3.0 * phi(-h) + 3.0 * phi(-2.0 * h) - phi(-3.0 * h)) / (h * h * h);
    const double large = phi(-1e4) * std::pow(1e4, -2.5) / (4.0 / (15.0 * kPi));
    const bool pass = std::abs(third + 0.5) <= 1e-4 && std::abs(large - 1.0) <= 1e-2;
    return {"phi_power_laws", pass, {{"third_derivative_at_0", third}, {"large_z_ratio", large}}};
}

Check check_bridge(std::uint64_t seed) {
    Options o;
    o.n = 200;
    o.seed = seed;
    EstimatorConfig c = estimator_config(o, 1.0);
    const MomentReport plain = estimate(c);
    c.mode = EstimatorMode::tilted;
    const MomentReport tilted = estimate(c);
    const double se = std::hypot(plain.std_error_log, tilted.std_error_log);
    const double gap = std::abs(plain.log_estimate - tilted.log_estimate);
    return {"unbiasedness_bridge",
            gap <= 3.0 * se,
            {{"plain", plain.log_estimate}, {"tilted", tilted.log_estimate}, {"combined_se", se}, {"ess", tilted.ess}}};
}

Check check_zeta_monotone(std::uint64_t seed) {
    Options o;
    o.n = 8;
    o.seed = seed;
    std::vector<double> values;
    for (double zeta : {0.5, 1.0, 2.0}) {
        o.zeta = zeta;
        values.push_back(estimate(estimator_config(o, 1.0)).log_estimate);
    }
    const bool pass = values[1] <= values[0] && values[2] <= values[1];
    return {"monotone_in_zeta", pass, {{"log_estimates", values}}};
}

Check check_determinism(std::uint64_t seed) {
    Options o;
    o.n = 8;
    o.seed = seed;
    o.mode = "tilted";
    EstimatorConfig c = estimator_config(o, 1.0);
    c.threads = 1;
    const MomentReport a = estimate(c);
    c.threads = 2;
    const MomentReport b = estimate(c);
    return {"determinism", a.per_sample_log_terms == b.per_sample_log_terms && a.log_estimate == b.log_estimate,
            {{"log_estimate", a.log_estimate}}};
}

std::vector<Check> run_suite(const std::string& suite, std::uint64_t seed) {
    std::vector<Check> checks;
    const bool all = suite == "all";
    if (all || suite == "riccati") {
        checks.push_back(check_hill_vs_oracle(seed));
        checks.push_back(check_flat_closed_form(seed));
        checks.push_back(check_coupling(seed));
        checks.push_back(check_monotone_scan(seed));
    }
    if (all || suite == "oracle") {
        checks.push_back(check_dirichlet_laplacian());
        checks.push_back(check_airy_ground_state());
        checks.push_back(check_comparison(seed));
        checks.push_back(check_flat_domination(seed));
    }
    if (all || suite == "interlace") checks.push_back(check_interlacing_sweep(seed));
    if (all || suite == "rate") {
        checks.push_back(check_objective_identity(seed));
        checks.push_back(check_minimizer());
        checks.push_back(check_phi_laws());
    }
    if (all || suite == "estimator") {
        checks.push_back(check_bridge(seed));
        checks.push_back(check_zeta_monotone(seed));
        checks.push_back(check_determinism(seed));
    }
    return checks;
}

// ----- commands -----

int cmd_rate(const Options& o, Sink& sink, std::ostream& summary) {
    if (!(o.beta > 0.0) || !(o.L > 0.0)) throw std::invalid_argument("beta and L must be positive");
    Table t{{"zeta", "scaled_rate"}, {}};
    for (double zeta : parse_grid(o.zeta_grid)) {
        if (zeta < 0.0) throw std::invalid_argument("zeta grid must be non-negative");
        const double rate = zeta == 0.0 ? 0.0 : scaled_rate(ModelParams{o.beta, o.L, zeta});
        t.rows.push_back({real(zeta), real(rate)});
    }
    t.write(sink.stream(), o.format);
    summary << "rate: " << t.rows.size() << " rows for beta=" << o.beta << " L=" << o.L << '\n';
    return kExitOk;
}

int cmd_vstar(const Options& o, Sink& sink, std::ostream& summary) {
    const ModelParams p = o.params();
    const double h = o.h_or(1e-2);
    if (!(h > 0.0)) throw std::invalid_argument("--h must be positive");
    const auto cells = static_cast<std::size_t>(std::ceil(p.zeta / h - 1e-9));
    Table t{{"x", "v_star"}, {}};
    for (std::size_t k = 0; k <= cells; ++k) {
        const double x = std::min(static_cast<double>(k) * h, p.zeta);
        t.rows.push_back({real(x), real(v_star(x, p))});
    }
    t.write(sink.stream(), o.format);
    summary << "vstar: " << t.rows.size() << " points on [0, " << p.zeta << "], v_*(0)=" << v_star(0.0, p) << '\n';
    return kExitOk;
}

int cmd_spectrum(const Options& o, Sink& sink, std::ostream& summary) {
    const double lo = std::isnan(o.lambda_lo) ? -10.0 : o.lambda_lo;
    const double hi = std::isnan(o.lambda_hi) ? 10.0 : o.lambda_hi;
    if (!(lo < hi)) throw std::invalid_argument("--lambda-lo must be below --lambda-hi");
    if (!(o.beta > 0.0)) throw std::invalid_argument("beta must be positive");
    const double h = o.h_or(5e-3);
    if (!(h > 0.0) || h >= 0.5) throw std::invalid_argument("--h must lie in (0, 0.5)");
    const PathGrid grid = make_grid(h, sao_required_length(hi));
    const BrownianPath path = sample_path(grid, o.seed, 0);
    if (!o.dump_paths.empty()) {
        std::ofstream file(o.dump_paths);
        if (!file) throw std::runtime_error("cannot open path dump file '" + o.dump_paths + "'");
        write_path_csv(file, path);
    }
    const double end = grid.x(static_cast<std::size_t>(std::ceil(sao_stop_point(hi) / h - 1e-9)));
    const TridiagonalOperator op = discretize(path, o.beta, 0.0, end, BoundaryCondition::dirichlet, LinearTerm::x);
    const std::size_t below = eigen_count(op, lo);
    const std::size_t upto = eigen_count(op, hi);
    Spectrum s;
    s.bc = BoundaryCondition::dirichlet;
    if (upto > 0) {
        const Spectrum all = lowest_eigenvalues(op, upto);
        s.eigenvalues.assign(all.eigenvalues.begin() + static_cast<std::ptrdiff_t>(below), all.eigenvalues.end());
        s.residual_bound = all.residual_bound;
    }
    s.n_computed = s.eigenvalues.size();
    const SaoCount riccati = count_sao(path, o.beta, hi, 0.0);
    if (o.format == "json") {
        json j;
        j["beta"] = o.beta;
        j["seed"] = o.seed;
        j["lambda_lo"] = lo;
        j["lambda_hi"] = hi;
        j["eigenvalues"] = s.eigenvalues;
        j["oracle_count"] = upto;
        j["riccati_count"] = riccati.count;
        sink.stream() << j.dump(2) << '\n';
    } else {
        write_spectrum_csv(sink.stream(), s);
    }
    const bool agree = std::abs(static_cast<long>(riccati.count) - static_cast<long>(upto)) <= 1;
    summary << "spectrum: " << s.eigenvalues.size() << " eigenvalues in (" << lo << ", " << hi
            << "], riccati count " << riccati.count << " vs oracle " << upto << '\n';
    return agree && !riccati.flagged ? kExitOk : kExitFlagged;
}

int cmd_validate(const Options& o, Sink& sink, std::ostream& summary) {
    const std::vector<Check> checks = run_suite(o.suite, o.seed);
    json report;
    report["suite"] = o.suite;
    report["seed"] = o.seed;
    json arr = json::array();
    std::size_t passed = 0;
    for (const auto& c : checks) {
        arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        passed += c.pass ? 1 : 0;
    }
    report["checks"] = arr;
    report["pass"] = passed == checks.size();
    sink.stream() << report.dump(2) << '\n';
    summary << "validate " << o.suite << ": " << passed << "/" << checks.size() << " checks passed\n";
    return passed == checks.size() ? kExitOk : kExitFlagged;
}

int report_rows(const std::vector<std::pair<EstimatorConfig, MomentReport>>& results, const Options& o, Sink& sink,
                std::ostream& summary, std::ostream& err, const char* name) {
    Table t{kEstimateColumns, {}};
    bool flagged = false;
    for (const auto& [c, r] : results) {
        t.rows.push_back(estimate_row(c, r));
        for (const auto& w : r.warnings) err << "warning (t=" << c.t << "): " << w << '\n';
        flagged = flagged || !r.reliable();
    }
    t.write(sink.stream(), o.format);
    for (const auto& [c, r] : results) {
        summary << name << ": t=" << c.t << " mode=" << to_string(c.mode) << " n=" << c.n_samples
                << " t^-2 log G=" << r.normalized << " (se " << r.std_error_log / (c.t * c.t) << ", ess " << r.ess
                << ", target " << -scaled_rate(c.params) << ")\n";
    }
    return flagged ? kExitFlagged : kExitOk;
}

int cmd_estimate(const Options& o, Sink& sink, std::ostream& summary, std::ostream& err) {
    const EstimatorConfig c = estimator_config(o, o.t);
    dump_first_path(o, c);
    return report_rows({{c, estimate(c)}}, o, sink, summary, err, "estimate");
}

int cmd_scan(const Options& o, Sink& sink, std::ostream& summary, std::ostream& err) {
    if (o.t_list.empty()) throw std::invalid_argument("--t-list must not be empty");
    Options tilted = o;
    tilted.mode = "tilted";
    std::vector<EstimatorConfig> configs;
    for (double t : o.t_list) configs.push_back(estimator_config(tilted, t));
    dump_first_path(o, configs.front());
    std::vector<std::pair<EstimatorConfig, MomentReport>> results;
    for (auto& row : convergence_scan(configs)) results.emplace_back(row.config, std::move(row.report));
    return report_rows(results, o, sink, summary, err, "scan");
}

// ----- option plumbing -----

std::string key_for(const std::string& flag) {
    std::string key = flag.substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

// Flags given on the command line win over the config file.
void apply_config_file(CLI::App* sub, Options& o) {
    if (o.config.empty()) return;
    std::ifstream in(o.config);
    if (!in) throw std::runtime_error("cannot read config file '" + o.config + "'");
    const json file = json::parse(in);
    if (!file.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    std::map<std::string, std::function<void(const json&)>> setters;
    auto bind = [&](const std::string& flag, auto& target) {
        CLI::Option* opt = sub->get_option_no_throw(flag);
        if (opt == nullptr) return;
        setters[key_for(flag)] = [opt, &target](const json& v) {
            if (opt->count() == 0) target = v.get<std::remove_reference_t<decltype(target)>>();
        };
    };
    bind("--beta", o.beta);
    bind("--L", o.L);
    bind("--zeta", o.zeta);
    bind("--t", o.t);
    bind("--t-list", o.t_list);
    bind("--alpha", o.alpha);
    bind("--n", o.n);
    bind("--mode", o.mode);
    bind("--seed", o.seed);
    bind("--threads", o.threads);
    bind("--out", o.out);
    bind("--format", o.format);
    bind("--suite", o.suite);
    bind("--zeta-grid", o.zeta_grid);
    bind("--lambda-lo", o.lambda_lo);
    bind("--lambda-hi", o.lambda_hi);
    bind("--h", o.h);
    bind("--dump-paths", o.dump_paths);
    for (const auto& [key, value] : file.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw std::invalid_argument("config key '" + key + "' does not apply to this command");
        it->second(value);
    }
}

std::uint64_t env_seed() {
    const char* text = std::getenv("AIRY_LDP_SEED");
    if (text == nullptr || *text == '\0') return 0;
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (text[used] != '\0') throw std::invalid_argument("AIRY_LDP_SEED must be a non-negative integer");
    return v;
}

void add_model(CLI::App* sub, Options& o, bool with_zeta) {
    sub->add_option("--beta", o.beta, "Inverse temperature, real > 0")->capture_default_str();
    sub->add_option("--L", o.L, "Cost scale L, real > 0")->capture_default_str();
    if (with_zeta) sub->add_option("--zeta", o.zeta, "Threshold zeta, real > 0")->capture_default_str();
}

void add_output(CLI::App* sub, Options& o) {
    sub->add_option("--out", o.out, "Output file path (default: stdout)");
    sub->add_option("--format", o.format, "Output format, one of {csv, json}")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sub->add_option("--config", o.config, "JSON file with option values; command-line flags take precedence");
}

void add_estimator(CLI::App* sub, Options& o) {
    sub->add_option("--alpha", o.alpha, "Partition exponent, real in (-1/3, 2/3)")->capture_default_str();
    sub->add_option("--n", o.n, "Number of Monte Carlo samples, integer >= 1")->capture_default_str();
    sub->add_option("--seed", o.seed, "Random seed, integer >= 0 (default: AIRY_LDP_SEED or 0)");
    sub->add_option("--threads", o.threads, "Worker threads, integer >= 0 (0: all available)")->capture_default_str();
    sub->add_option("--lambda-lo", o.lambda_lo, "Lower end of the centred lambda window, real (default: automatic)");
    sub->add_option("--lambda-hi", o.lambda_hi, "Upper end of the centred lambda window, real (default: 40 t^-1/3)");
    sub->add_option("--h", o.h, "Path grid and Riccati step, real in (0, 0.5) (default 0.01)");
    sub->add_option("--dump-paths", o.dump_paths, "Write the first sampled path to this CSV file");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Large deviations of the stochastic Airy operator: rate function, spectra and moment estimates",
                 args.empty() ? "airy-ldp" : args.front()};
    app.set_help_flag("--help", "Print this help message and exit");
    app.set_help_all_flag("--help-all", "Print help for every command and exit");
    app.require_subcommand(1);

    CLI::App* rate = app.add_subcommand("rate", "Table of zeta against the scaled rate");
    add_model(rate, o, false);
    rate->add_option("--zeta-grid", o.zeta_grid, "Grid start:stop:step with step > 0 and zeta >= 0")
        ->capture_default_str();
    add_output(rate, o);

    CLI::App* vstar = app.add_subcommand("vstar", "Optimal control profile v_* on [0, zeta]");
    add_model(vstar, o, true);
    vstar->add_option("--h", o.h, "Grid step, real > 0 (default 0.01)");
    add_output(vstar, o);

    CLI::App* spectrum = app.add_subcommand("spectrum", "Eigenvalues of one sampled stochastic Airy operator");
    spectrum->add_option("--beta", o.beta, "Inverse temperature, real > 0")->capture_default_str();
    spectrum->add_option("--seed", o.seed, "Random seed, integer >= 0 (default: AIRY_LDP_SEED or 0)");
    spectrum->add_option("--lambda-lo", o.lambda_lo, "Lower end of the eigenvalue window, real (default -10)");
    spectrum->add_option("--lambda-hi", o.lambda_hi, "Upper end of the eigenvalue window, real (default 10)");
    spectrum->add_option("--h", o.h, "Grid step, real in (0, 0.5) (default 0.005)");
    spectrum->add_option("--dump-paths", o.dump_paths, "Write the sampled path to this CSV file");
    add_output(spectrum, o);

    CLI::App* validate = app.add_subcommand("validate", "Run invariant suites and report margins as JSON");
    validate->add_option("--suite", o.suite, "Suite, one of {riccati, oracle, interlace, rate, estimator, all}")
        ->check(CLI::IsMember({"riccati", "oracle", "interlace", "rate", "estimator", "all"}))
        ->capture_default_str();
    validate->add_option("--seed", o.seed, "Random seed, integer >= 0 (default: AIRY_LDP_SEED or 0)");
    validate->add_option("--out", o.out, "Output file path (default: stdout)");
    validate->add_option("--config", o.config, "JSON file with option values; command-line flags take precedence");

    CLI::App* est = app.add_subcommand("estimate", "Monte Carlo estimate of t^-2 log G");
    add_model(est, o, true);
    est->add_option("--t", o.t, "Time parameter t, real > 0")->capture_default_str();
    est->add_option("--mode", o.mode, "Estimator, one of {plain, tilted}")
        ->check(CLI::IsMember({"plain", "tilted"}))
        ->capture_default_str();
    add_estimator(est, o);
    add_output(est, o);

    CLI::App* scan = app.add_subcommand("scan", "Tilted estimates over increasing t with the target column");
    add_model(scan, o, true);
    scan->add_option("--t-list", o.t_list, "Increasing list of t > 0, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    add_estimator(scan, o);
    add_output(scan, o);

    try {
        o.seed = env_seed();
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        if (!reversed.empty()) reversed.pop_back();
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help("", CLI::AppFormatMode::All) : app.help());
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        err << "run with --help for usage\n";
        return kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        apply_config_file(sub, o);
        Sink sink(o.out, out);
        std::ostream& summary = sink.to_file() ? out : err;
        int code = kExitOk;
        if (sub == rate) code = cmd_rate(o, sink, summary);
        if (sub == vstar) code = cmd_vstar(o, sink, summary);
        if (sub == spectrum) code = cmd_spectrum(o, sink, summary);
        if (sub == validate) code = cmd_validate(o, sink, summary);
        if (sub == est) code = cmd_estimate(o, sink, summary, err);
        if (sub == scan) code = cmd_scan(o, sink, summary, err);
        sink.close();
        return code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace airy_ldp::cli

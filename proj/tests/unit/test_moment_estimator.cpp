#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/special_functions/airy.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "airy_ldp/cost_function.hpp"
#include "airy_ldp/moment_estimator.hpp"
#include "airy_ldp/rate_function.hpp"

using namespace airy_ldp;

namespace {

EstimatorConfig base_config(std::size_t n, EstimatorMode mode = EstimatorMode::plain) {
    EstimatorConfig c;
    c.params = ModelParams{2.0, 1.0, 1.0};
    c.t = 1.0;
    c.n_samples = n;
    c.mode = mode;
    c.seed = 5;
    c.threads = 2;
    return c;
}

}  // namespace

TEST_CASE("log_mean_exp") {
    const std::vector<double> terms{0.0, std::log(2.0), std::log(3.0)};
    const LogMeanExp a = log_mean_exp(terms);
    CHECK(a.log_mean == doctest::Approx(std::log(2.0)));
    // Sample sd of {1, 2, 3} is 1, so se(mean) = 1/sqrt(3) and se(log) = se/mean.
    CHECK(a.std_error_log == doctest::Approx(1.0 / std::sqrt(3.0) / 2.0));
    CHECK(a.std_error_defined);

    const std::vector<double> shifted{-5000.0, -5000.0 + std::log(2.0), -5000.0 + std::log(3.0)};
    CHECK(log_mean_exp(shifted).log_mean == doctest::Approx(-5000.0 + std::log(2.0)));
    const std::vector<double> big{800.0, 800.0};
    CHECK(log_mean_exp(big).log_mean == doctest::Approx(800.0));

    const std::vector<double> one{1.5};
    const LogMeanExp single = log_mean_exp(one);
    CHECK(single.log_mean == 1.5);
    CHECK_FALSE(single.std_error_defined);

    const double ninf = -std::numeric_limits<double>::infinity();
    const std::vector<double> dead{ninf, ninf};
    const LogMeanExp under = log_mean_exp(dead);
    CHECK(under.underflow);
    CHECK(under.log_mean == ninf);

    const std::vector<double> partial{ninf, 0.0};
    CHECK(log_mean_exp(partial).log_mean == doctest::Approx(std::log(0.5)));
    CHECK_THROWS_AS(log_mean_exp(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(log_mean_exp(std::vector<double>{0.0, std::nan("")}), std::runtime_error);
}

TEST_CASE("effective sample size") {
    CHECK(effective_sample_size(std::vector<double>(7, -3.0)) == doctest::Approx(7.0));
    CHECK(effective_sample_size(std::vector<double>{0.0, std::log(3.0)}) == doctest::Approx(16.0 / 10.0));
    CHECK(effective_sample_size(std::vector<double>{0.0, -800.0, -900.0}) == doctest::Approx(1.0));
    CHECK(effective_sample_size(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(2.0));
}

TEST_CASE("statistic on the zero path matches the Airy spectrum") {
    const EstimatorConfig c = base_config(1);
    const BrownianPath z = zero_path(make_grid(c.riccati_step, c.path_length()));
    const StatisticResult r = spectral_statistic(z, c);
    double expected = 0.0;
    for (int k = 1; k <= 200; ++k) expected += w_t(-boost::math::airy_ai_zero<double>(k) - 1.0, 1.0);
    CHECK(std::abs(r.value - expected) < 1e-2);
    CHECK(r.tail_verified);
    CHECK_FALSE(r.flagged);
    CHECK(r.lo < 2.3381);
    CHECK(r.value >= 0.0);
}

TEST_CASE("statistic with a high ground state is in the exponential tail") {
    const EstimatorConfig c = base_config(1);
    const BrownianPath z = zero_path(make_grid(c.riccati_step, c.path_length()));
    DriftProfile lift;
    lift.breakpoints = {0.0, z.grid.length};
    lift.levels = {10.0};
    // The potential gains (2/sqrt 2) * 10, so the ground state is about 16.5 > 1 + 10.
    const StatisticResult r = spectral_statistic(add_drift(z, lift), c);
    CHECK(r.value <= 1e-3);
    CHECK(r.value >= 0.0);
}

TEST_CASE("doubling the quadrature nodes changes the statistic little") {
    EstimatorConfig c = base_config(1);
    const PathGrid g = make_grid(c.riccati_step, c.path_length());
    for (std::uint64_t s = 0; s < 10; ++s) {
        const BrownianPath p = sample_path(g, 61, s);
        c.window.n_nodes = 16;
        const double coarse = spectral_statistic(p, c).value;
        c.window.n_nodes = 32;
        const double fine = spectral_statistic(p, c).value;
        CHECK(std::abs(coarse - fine) <= 1e-3 * std::max(fine, 1e-12));
    }
    c.window.n_nodes = 16;
    const BrownianPath short_path = sample_path(make_grid(c.riccati_step, 5.0), 61);
    CHECK_THROWS_AS(spectral_statistic(short_path, c), std::invalid_argument);
}

TEST_CASE("estimates are deterministic across thread counts") {
    for (auto mode : {EstimatorMode::plain, EstimatorMode::tilted}) {
        EstimatorConfig c = base_config(24, mode);
        c.threads = 1;
        const MomentReport a = estimate(c);
        c.threads = 3;
        const MomentReport b = estimate(c);
        CHECK(a.log_estimate == b.log_estimate);
        CHECK(a.std_error_log == b.std_error_log);
        CHECK(a.ess == b.ess);
        CHECK(a.per_sample_log_terms == b.per_sample_log_terms);
        CHECK(a.n_samples == 24);
        CHECK(a.normalized == a.log_estimate);
        CHECK(a.ess <= 24.0 + 1e-9);
        CHECK(std::isfinite(a.std_error_log));
    }
}

TEST_CASE("plain mode has unit weights") {
    const MomentReport r = estimate_plain(base_config(8));
    for (double w : r.per_sample_log_weights) CHECK(w == 0.0);
    CHECK(r.ess == doctest::Approx(8.0));
    CHECK(r.log_estimate < 0.0);
}

TEST_CASE("a single sample flags the standard error") {
    const MomentReport r = estimate_plain(base_config(1));
    CHECK_FALSE(r.std_error_defined);
    CHECK_FALSE(r.reliable());
    bool found = false;
    for (const auto& w : r.warnings) found = found || w.find("standard error undefined") != std::string::npos;
    CHECK(found);
}

TEST_CASE("large zeta gives a strongly negative log estimate") {
    EstimatorConfig c = base_config(4);
    c.params.zeta = 30.0;
    const MomentReport r = estimate_plain(c);
    CHECK(r.log_estimate < -10.0);
}

TEST_CASE("estimate_tilted requires tilted mode") {
    CHECK_THROWS_AS(estimate_tilted(base_config(4)), std::invalid_argument);
}

TEST_CASE("a vanishing tilt reproduces the plain estimate") {
    EstimatorConfig plain = base_config(16);
    plain.params.zeta = 1e-8;
    EstimatorConfig tilted = plain;
    tilted.mode = EstimatorMode::tilted;
    const MomentReport a = estimate(plain);
    const MomentReport b = estimate(tilted);
    CHECK(std::abs(a.log_estimate - b.log_estimate) < 1e-6);
    CHECK(b.ess == doctest::Approx(16.0).epsilon(1e-6));
}

TEST_CASE("plain and tilted estimates agree at small n") {
    const MomentReport p = estimate(base_config(300));
    const MomentReport q = estimate(base_config(300, EstimatorMode::tilted));
    const double se = std::hypot(p.std_error_log, q.std_error_log);
    CHECK(std::abs(p.log_estimate - q.log_estimate) <= 3.0 * se);
    CHECK(q.ess > 10.0);
    CHECK(q.ess < 300.0);
}

TEST_CASE("log estimates are non-increasing in zeta") {
    std::vector<MomentReport> reports;
    for (double zeta : {0.5, 1.0, 2.0}) {
        EstimatorConfig c = base_config(12);
        c.params.zeta = zeta;
        reports.push_back(estimate_plain(c));
    }
    for (std::size_t k = 1; k < reports.size(); ++k) {
        CHECK(reports[k].log_estimate <= reports[k - 1].log_estimate);
        for (std::size_t s = 0; s < 12; ++s) {
            CHECK(reports[k].per_sample_log_terms[s] <= reports[k - 1].per_sample_log_terms[s]);
        }
    }
}

TEST_CASE("overflow canary at t = 8") {
    EstimatorConfig c = base_config(4, EstimatorMode::tilted);
    c.t = 8.0;
    const MomentReport r = estimate(c);
    CHECK(std::isfinite(r.log_estimate));
    CHECK(std::isfinite(r.std_error_log));
    for (double x : r.per_sample_log_terms) CHECK(std::isfinite(x));
    CHECK(r.normalized == doctest::Approx(r.log_estimate / 64.0));
}

TEST_CASE("convergence scan rows") {
    std::vector<EstimatorConfig> configs;
    for (double t : {1.0, 2.0}) {
        EstimatorConfig c = base_config(6);
        c.t = t;
        configs.push_back(c);
    }
    const auto rows = convergence_scan(configs);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.target == doctest::Approx(-scaled_rate(row.config.params)));
        CHECK(row.config.mode == EstimatorMode::tilted);
        CHECK(row.report.n_samples == 6);
    }
    CHECK(convergence_scan(std::span<const EstimatorConfig>(configs.data(), 1)).size() == 1);

    std::vector<EstimatorConfig> reversed{configs[1], configs[0]};
    CHECK_THROWS_AS(convergence_scan(reversed), std::invalid_argument);
    std::vector<EstimatorConfig> mixed = configs;
    mixed[1].params.L = 2.0;
    CHECK_THROWS_AS(convergence_scan(mixed), std::invalid_argument);
}

TEST_CASE("lower bound diagnostic") {
    EstimatorConfig tiny = base_config(8);
    tiny.params.zeta = 1e-3;
    tiny.alpha = 0.0;
    const DiagnosticReport empty = lower_bound_diagnostic(tiny);
    CHECK(empty.normalized == 0.0);

    EstimatorConfig c = base_config(200);
    const DiagnosticReport d = lower_bound_diagnostic(c);
    const MomentReport plain = estimate_plain(c);
    CHECK(d.normalized >= plain.normalized - 3.0 * plain.std_error_log);
    CHECK(d.log_G.size() == make_partition(1.0, c.alpha, 1.0).n_intervals());
    CHECK(std::abs(d.shuffled_normalized - d.paired_normalized) <= 4.0 * d.std_error + 1e-12);
    CHECK_THROWS_AS(lower_bound_diagnostic(c, 0.0), std::invalid_argument);
}

TEST_CASE("configuration validation") {
    EstimatorConfig c = base_config(4);
    CHECK_NOTHROW(c.validate());
    CHECK(c.shift() == doctest::Approx(1.0));
    CHECK(c.path_length() >= c.window_hi() + c.shift());
    auto rejects = [](EstimatorConfig bad) { CHECK_THROWS_AS(bad.validate(), std::invalid_argument); };
    EstimatorConfig bad = c;
    bad.t = 0.0;
    rejects(bad);
    bad = c;
    bad.alpha = 2.0 / 3.0;
    rejects(bad);
    bad = c;
    bad.n_samples = 0;
    rejects(bad);
    bad = c;
    bad.window.n_nodes = 8;
    rejects(bad);
    bad = c;
    bad.window.lo = 1.0;
    bad.window.hi = 0.0;
    rejects(bad);
    bad = c;
    bad.riccati_step = 0.0;
    rejects(bad);
    bad = c;
    bad.params.beta = -1.0;
    rejects(bad);
    CHECK(parse_mode("plain") == EstimatorMode::plain);
    CHECK(parse_mode("tilted") == EstimatorMode::tilted);
    CHECK_THROWS_AS(parse_mode("bogus"), std::invalid_argument);
    CHECK(std::string(to_string(EstimatorMode::tilted)) == "tilted");
}

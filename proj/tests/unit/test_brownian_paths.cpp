#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "airy_ldp/brownian_paths.hpp"

using namespace airy_ldp;

namespace {

DriftProfile step_profile(std::vector<double> breakpoints, std::vector<double> levels) {
    DriftProfile d;
    d.breakpoints = std::move(breakpoints);
    d.levels = std::move(levels);
    return d;
}

BrownianPath linear_path(double step, double length, double slope) {
    const PathGrid g = make_grid(step, length);
    std::vector<double> v(g.n_points);
    for (std::size_t j = 0; j < g.n_points; ++j) v[j] = slope * g.x(j);
    return path_from_values(g, v);
}

}  // namespace

TEST_CASE("make_grid snaps the length and rejects bad input") {
    const PathGrid g = make_grid(0.5, 1.0);
    CHECK(g.n_points == 3);
    CHECK(g.length == doctest::Approx(1.0));
    const PathGrid odd = make_grid(0.3, 1.0);
    CHECK(odd.n_points == 4);
    CHECK(std::abs(static_cast<double>(odd.n_points - 1) * odd.step - odd.length) <= 1e-15);
    CHECK_THROWS_AS(make_grid(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(-0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(0.1, 0.0), std::invalid_argument);
}

TEST_CASE("sample_path pins the start and is deterministic") {
    const PathGrid g = make_grid(0.5, 1.0);
    const BrownianPath p = sample_path(g, 42);
    CHECK(p.values.size() == 3);
    CHECK(p.values[0] == 0.0);
    CHECK(p.seed == 42);

    const PathGrid fine = make_grid(1e-3, 5.0);
    const BrownianPath a = sample_path(fine, 9, 3);
    const BrownianPath b = sample_path(fine, 9, 3);
    CHECK(a.values == b.values);
    CHECK(sample_path(fine, 10, 3).values != a.values);
    CHECK(sample_path(fine, 9, 4).values != a.values);
}

TEST_CASE("sample_path variance at x = 1 matches the law of large numbers") {
    const PathGrid g = make_grid(0.01, 1.0);
    const int n = 100000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int s = 0; s < n; ++s) {
        const double x = sample_path(g, 2024, static_cast<std::uint64_t>(s)).values.back();
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(var - 1.0) < 0.02);
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sample_path increments are uncorrelated with variance h") {
    const PathGrid g = make_grid(0.01, 100.0);
    const BrownianPath p = sample_path(g, 5);
    double s2 = 0.0;
    double lag = 0.0;
    const std::size_t n = g.n_points - 1;
    for (std::size_t j = 0; j < n; ++j) {
        const double d = p.values[j + 1] - p.values[j];
        s2 += d * d;
        if (j + 1 < n) lag += d * (p.values[j + 2] - p.values[j + 1]);
    }
    CHECK(s2 / static_cast<double>(n) == doctest::Approx(0.01).epsilon(0.05));
    CHECK(std::abs(lag / s2) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("add_drift adds the exact cumulative drift") {
    const PathGrid g = make_grid(0.01, 2.0);
    const BrownianPath sampled = sample_path(g, 1);

    const BrownianPath same = add_drift(sampled, step_profile({0.0, 2.0}, {0.0}));
    CHECK(same.values == sampled.values);
    CHECK(same.drift_applied.has_value());

    const BrownianPath ramp = add_drift(zero_path(g), step_profile({0.0, 1.0}, {1.0}));
    CHECK(ramp.at(0.5) == doctest::Approx(0.5));
    CHECK(ramp.at(1.5) == doctest::Approx(1.0));

    const BrownianPath stepped = add_drift(sampled, step_profile({0.0, 0.5}, {2.0}));
    CHECK(stepped.at(1.0) - sampled.at(1.0) == doctest::Approx(1.0));
    CHECK(stepped.at(0.25) - sampled.at(0.25) == doctest::Approx(0.5));

    // Breakpoints off the grid: the ramp is integrated exactly inside a cell.
    const BrownianPath offgrid = add_drift(zero_path(g), step_profile({0.0, 0.333}, {3.0}));
    CHECK(offgrid.at(1.0) == doctest::Approx(0.999));
    CHECK(offgrid.values[33] == doctest::Approx(0.99));
    CHECK(offgrid.values[34] == doctest::Approx(0.999));

    CHECK_THROWS_AS(add_drift(sampled, step_profile({3.0, 4.0}, {1.0})), std::invalid_argument);
    CHECK_THROWS_AS(add_drift(sampled, step_profile({0.0, 1.0, 0.5}, {1.0, 1.0})), std::invalid_argument);
}

TEST_CASE("DriftProfile integral and energy") {
    const DriftProfile d = step_profile({0.0, 1.0, 3.0}, {2.0, -1.0});
    CHECK(d.level_at(0.5) == 2.0);
    CHECK(d.level_at(1.0) == 2.0);
    CHECK(d.level_at(2.0) == -1.0);
    CHECK(d.level_at(4.0) == 0.0);
    CHECK(d.integral(0.5) == doctest::Approx(1.0));
    CHECK(d.integral(2.0) == doctest::Approx(1.0));
    CHECK(d.integral(10.0) == doctest::Approx(0.0));
    CHECK(d.energy() == doctest::Approx(4.0 + 2.0));
}

TEST_CASE("mollify keeps constants and lines and stays close at minimal width") {
    const PathGrid g = make_grid(0.01, 4.0);
    const BrownianPath zero = mollify(zero_path(g), 0.1);
    CHECK(std::all_of(zero.values.begin(), zero.values.end(), [](double v) { return v == 0.0; }));

    const BrownianPath line = mollify(linear_path(0.01, 4.0, 1.0), 0.2);
    for (std::size_t j = 25; j + 26 < g.n_points; ++j) {
        CHECK(line.values[j + 1] - line.values[j] == doctest::Approx(0.01).epsilon(1e-9));
    }

    const BrownianPath raw = sample_path(g, 77);
    const BrownianPath smooth = mollify(raw, g.step);
    double max_inc = 0.0;
    double max_dev = 0.0;
    for (std::size_t j = 0; j + 1 < g.n_points; ++j) {
        max_inc = std::max(max_inc, std::abs(raw.values[j + 1] - raw.values[j]));
    }
    for (std::size_t j = 0; j < g.n_points; ++j) {
        max_dev = std::max(max_dev, std::abs(smooth.values[j] - raw.values[j]));
    }
    CHECK(max_dev < 2.0 * max_inc);
    CHECK(smooth.values[0] == 0.0);

    CHECK_THROWS_AS(mollify(raw, 0.5 * g.step), std::invalid_argument);
}

TEST_CASE("mollify reduces second differences") {
    const PathGrid g = make_grid(1e-3, 2.0);
    const BrownianPath raw = sample_path(g, 3);
    const double eps = 0.05;
    const BrownianPath smooth = mollify(raw, eps);
    double sup = 0.0;
    for (double v : raw.values) sup = std::max(sup, std::abs(v));
    double raw_d2 = 0.0;
    double smooth_d2 = 0.0;
    for (std::size_t j = 1; j + 1 < g.n_points; ++j) {
        raw_d2 = std::max(raw_d2, std::abs(raw.values[j + 1] - 2.0 * raw.values[j] + raw.values[j - 1]));
        smooth_d2 = std::max(smooth_d2, std::abs(smooth.values[j + 1] - 2.0 * smooth.values[j] + smooth.values[j - 1]));
    }
    CHECK(smooth_d2 < 0.1 * raw_d2);
    // Second differences of a smooth function are O(h^2 / eps^2) sup|B|.
    CHECK(smooth_d2 <= 100.0 * g.step * g.step / (eps * eps) * sup);
}

TEST_CASE("increment_max against a brute-force scan") {
    const PathGrid g = make_grid(0.01, 2.0);
    CHECK(increment_max(zero_path(g), 0.0, 2.0) == 0.0);
    CHECK(increment_max(linear_path(0.01, 2.0, 1.0), 0.0, 2.0) == doctest::Approx(2.0));

    for (std::uint64_t s = 0; s < 20; ++s) {
        const BrownianPath p = sample_path(g, 100, s);
        const std::size_t ia = 37;
        const std::size_t ib = 161;
        double naive = 0.0;
        for (std::size_t j = ia; j <= ib; ++j) naive = std::max(naive, std::abs(p.values[j] - p.values[ia]));
        CHECK(increment_max(p, g.x(ia), g.x(ib)) == naive);
    }
    CHECK_THROWS_AS(increment_max(zero_path(g), 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(increment_max(zero_path(g), 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("girsanov_log_weight closed cases") {
    const PathGrid g = make_grid(0.01, 2.0);
    const BrownianPath p = sample_path(g, 8);
    CHECK(girsanov_log_weight(p, step_profile({0.0, 1.0}, {0.0})) == 0.0);
    CHECK(girsanov_log_weight(zero_path(g), step_profile({0.0, 1.0}, {1.0})) == doctest::Approx(0.5));

    // Node breakpoints reduce to -sum V_i (B(x_i) - B(x_{i-1})) + 1/2 int V^2.
    const DriftProfile d = step_profile({0.0, 0.5, 1.5}, {1.5, -0.75});
    const double expected = -(1.5 * (p.at(0.5) - p.at(0.0)) - 0.75 * (p.at(1.5) - p.at(0.5))) +
                            0.5 * (1.5 * 1.5 * 0.5 + 0.75 * 0.75 * 1.0);
    CHECK(girsanov_log_weight(p, d) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("girsanov exponential martingale has unit mean") {
    const PathGrid g = make_grid(0.01, 1.0);
    const DriftProfile d = step_profile({0.0, 1.0}, {1.0});
    const int n = 100000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int s = 0; s < n; ++s) {
        const double w = std::exp(-girsanov_log_weight(sample_path(g, 31, static_cast<std::uint64_t>(s)), d));
        sum += w;
        sum_sq += w * w;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("reweighted drifted samples reproduce undrifted expectations") {
    // E[g(B)] = E[exp(girsanov_log_weight(B~ + int V, V)) g(B~ + int V)] for B~ undrifted.
    const PathGrid g = make_grid(0.01, 1.0);
    const DriftProfile d = step_profile({0.0, 0.4, 1.0}, {0.8, 0.3});
    auto functional = [](const BrownianPath& p) {
        const double x = p.values.back();
        return std::clamp(x * x - 0.5 * x, -1.0, 3.0);
    };
    const int n = 100000;
    double plain = 0.0;
    double plain_sq = 0.0;
    double tilted = 0.0;
    double tilted_sq = 0.0;
    for (int s = 0; s < n; ++s) {
        const BrownianPath b = sample_path(g, 55, static_cast<std::uint64_t>(s));
        const double f = functional(b);
        plain += f;
        plain_sq += f * f;
        const BrownianPath shifted = add_drift(b, d);
        const double v = std::exp(girsanov_log_weight(shifted, d)) * functional(shifted);
        tilted += v;
        tilted_sq += v * v;
    }
    plain /= n;
    tilted /= n;
    const double se = std::sqrt((plain_sq / n - plain * plain + tilted_sq / n - tilted * tilted) / n);
    CHECK(std::abs(plain - tilted) < 3.0 * se);
}

TEST_CASE("path serialization round-trips") {
    const PathGrid g = make_grid(0.01, 1.5);
    const BrownianPath p = sample_path(g, 1234567890123ULL);

    std::stringstream csv;
    write_path_csv(csv, p);
    const BrownianPath from_csv = read_path_csv(csv);
    CHECK(from_csv.values == p.values);
    CHECK(from_csv.seed == p.seed);
    CHECK(from_csv.grid.n_points == g.n_points);

    std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
    write_path_binary(bin, p);
    const BrownianPath from_bin = read_path_binary(bin);
    CHECK(from_bin.values == p.values);
    CHECK(from_bin.seed == p.seed);

    std::stringstream bad("not a path\n");
    CHECK_THROWS(read_path_csv(bad));
    std::stringstream bad_bin("XXXXXXXX");
    CHECK_THROWS(read_path_binary(bad_bin));
}

TEST_CASE("path_from_values and at validate their input") {
    const PathGrid g = make_grid(0.5, 1.0);
    CHECK_THROWS_AS(path_from_values(g, {1.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(path_from_values(g, {0.0, 0.0}), std::invalid_argument);
    const BrownianPath p = path_from_values(g, {0.0, 1.0, 3.0});
    CHECK(p.at(0.25) == doctest::Approx(0.5));
    CHECK(p.at(0.75) == doctest::Approx(2.0));
    CHECK_THROWS_AS(p.at(1.5), std::out_of_range);
    CHECK(p.node_index(0.5) == 1);
    CHECK_THROWS_AS(p.node_index(0.3), std::invalid_argument);
}

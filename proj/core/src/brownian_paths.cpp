#include "airy_ldp/brownian_paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "airy_ldp/rng.hpp"

namespace airy_ldp {

namespace {

constexpr double kNodeTolerance = 1e-9;
constexpr char kBinaryMagic[8] = {'A', 'L', 'D', 'P', 'P', 'T', 'H', '1'};

}  // namespace

PathGrid make_grid(double step, double x_max) {
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("make_grid: step must be positive");
    if (!(x_max > 0.0) || !std::isfinite(x_max)) throw std::invalid_argument("make_grid: length must be positive");
    const double cells = std::round(x_max / step);
    if (cells < 1.0) throw std::invalid_argument("make_grid: length shorter than one step");
    PathGrid g;
    g.step = step;
    g.n_points = static_cast<std::size_t>(cells) + 1;
    g.length = cells * step;
    return g;
}

void DriftProfile::validate() const {
    if (breakpoints.size() < 2) throw std::invalid_argument("DriftProfile: need at least two breakpoints");
    if (levels.size() + 1 != breakpoints.size()) {
        throw std::invalid_argument("DriftProfile: levels.size() must equal breakpoints.size() - 1");
    }
    if (breakpoints.front() < 0.0) throw std::invalid_argument("DriftProfile: breakpoints must be non-negative");
    for (std::size_t i = 1; i < breakpoints.size(); ++i) {
        if (!(breakpoints[i] > breakpoints[i - 1])) {
            throw std::invalid_argument("DriftProfile: breakpoints must be strictly increasing");
        }
    }
}

double DriftProfile::level_at(double x) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (x > breakpoints[i] && x <= breakpoints[i + 1]) return levels[i];
    }
    return 0.0;
}

double DriftProfile::integral(double x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double lo = breakpoints[i];
        const double hi = std::min(breakpoints[i + 1], x);
        if (hi <= lo) break;
        acc += levels[i] * (hi - lo);
    }
    return acc;
}

double DriftProfile::energy() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        acc += levels[i] * levels[i] * (breakpoints[i + 1] - breakpoints[i]);
    }
    return acc;
}

double BrownianPath::at(double x) const {
    if (x < -kNodeTolerance * grid.step || x > grid.length + kNodeTolerance * grid.step) {
        throw std::out_of_range("BrownianPath::at: x outside path domain");
    }
    const double s = std::clamp(x / grid.step, 0.0, static_cast<double>(grid.n_points - 1));
    const auto j = std::min(static_cast<std::size_t>(s), grid.n_points - 2);
    const double frac = s - static_cast<double>(j);
    return values[j] + frac * (values[j + 1] - values[j]);
}

bool BrownianPath::is_node(double x) const {
    const double s = x / grid.step;
    const double r = std::round(s);
    return std::abs(s - r) <= kNodeTolerance * std::max(1.0, std::abs(s)) && r >= 0.0 &&
           r <= static_cast<double>(grid.n_points - 1);
}

std::size_t BrownianPath::node_index(double x) const {
    if (!is_node(x)) {
        std::ostringstream msg;
        msg << "BrownianPath: x = " << x << " is not a grid node (step " << grid.step << ")";
        throw std::invalid_argument(msg.str());
    }
    return static_cast<std::size_t>(std::round(x / grid.step));
}

BrownianPath sample_path(const PathGrid& grid, std::uint64_t seed, std::uint64_t stream) {
    if (!(grid.step > 0.0) || !(grid.length > 0.0) || grid.n_points < 2) {
        throw std::invalid_argument("sample_path: invalid grid");
    }
    auto engine = make_engine(seed, stream);
    std::normal_distribution<double> normal(0.0, std::sqrt(grid.step));
    BrownianPath p;
    p.grid = grid;
    p.seed = seed;
    p.values.resize(grid.n_points);
    p.values[0] = 0.0;
    for (std::size_t j = 1; j < grid.n_points; ++j) p.values[j] = p.values[j - 1] + normal(engine);
    return p;
}

BrownianPath path_from_values(const PathGrid& grid, std::vector<double> values) {
    if (values.size() != grid.n_points) throw std::invalid_argument("path_from_values: size mismatch");
    if (values.front() != 0.0) throw std::invalid_argument("path_from_values: values[0] must be 0");
    BrownianPath p;
    p.grid = grid;
    p.values = std::move(values);
    return p;
}

BrownianPath zero_path(const PathGrid& grid) {
    return path_from_values(grid, std::vector<double>(grid.n_points, 0.0));
}

BrownianPath add_drift(const BrownianPath& path, const DriftProfile& drift) {
    drift.validate();
    if (drift.breakpoints.front() > path.grid.length) {
        throw std::invalid_argument("add_drift: drift starts beyond the path domain");
    }
    BrownianPath out = path;
    // Cumulative drift is piecewise linear; walk the pieces alongside the nodes.
    std::size_t piece = 0;
    double acc_at_piece = 0.0;
    for (std::size_t j = 0; j < out.values.size(); ++j) {
        const double x = path.grid.x(j);
        while (piece < drift.levels.size() && drift.breakpoints[piece + 1] <= x) {
            acc_at_piece += drift.levels[piece] * (drift.breakpoints[piece + 1] - drift.breakpoints[piece]);
            ++piece;
        }
        double cum = acc_at_piece;
        if (piece < drift.levels.size() && x > drift.breakpoints[piece]) {
            cum += drift.levels[piece] * (x - drift.breakpoints[piece]);
        }
        out.values[j] += cum;
    }
    out.drift_applied = drift;
    return out;
}

BrownianPath mollify(const BrownianPath& path, double epsilon) {
    const double h = path.grid.step;
    if (!(epsilon >= h * (1.0 - 1e-12))) throw std::invalid_argument("mollify: epsilon must be at least the grid step");
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(epsilon / h));
    std::vector<double> kernel(static_cast<std::size_t>(2 * reach + 1), 0.0);
    double mass = 0.0;
    for (std::ptrdiff_t k = -reach; k <= reach; ++k) {
        const double y = static_cast<double>(k) * h / epsilon;
        const double w = std::abs(y) < 1.0 ? std::exp(-1.0 / (1.0 - y * y)) : 0.0;
        kernel[static_cast<std::size_t>(k + reach)] = w;
        mass += w;
    }
    for (double& w : kernel) w /= mass;

    const auto n = static_cast<std::ptrdiff_t>(path.values.size());
    auto reflect = [n](std::ptrdiff_t i) {
        const std::ptrdiff_t period = 2 * (n - 1);
        i %= period;
        if (i < 0) i += period;
        return i < n ? i : period - i;
    };
    BrownianPath out = path;
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -reach; k <= reach; ++k) {
            const double w = kernel[static_cast<std::size_t>(k + reach)];
            if (w != 0.0) acc += w * path.values[static_cast<std::size_t>(reflect(j + k))];
        }
        out.values[static_cast<std::size_t>(j)] = acc;
    }
    // Keep the B(0) = 0 normalization; the operators only see increments.
    const double shift = out.values[0];
    for (double& v : out.values) v -= shift;
    return out;
}

double increment_max(const BrownianPath& path, double a, double b) {
    if (!(b > a)) throw std::invalid_argument("increment_max: empty or reversed interval");
    if (a < 0.0 || b > path.grid.length * (1.0 + 1e-12)) {
        throw std::invalid_argument("increment_max: interval outside path domain");
    }
    const double base = path.at(a);
    const double h = path.grid.step;
    auto first = static_cast<std::size_t>(std::ceil(a / h - kNodeTolerance));
    const auto last = std::min(static_cast<std::size_t>(std::floor(b / h + kNodeTolerance)), path.grid.n_points - 1);
    double best = 0.0;
    for (std::size_t j = first; j <= last; ++j) best = std::max(best, std::abs(path.values[j] - base));
    return best;
}

double girsanov_log_weight(const BrownianPath& path, const DriftProfile& drift) {
    drift.validate();
    const double h = path.grid.step;
    if (drift.end() > path.grid.length + kNodeTolerance * h) {
        throw std::invalid_argument("girsanov_log_weight: drift extends beyond the path domain");
    }
    const auto cells = static_cast<std::size_t>(std::ceil(drift.end() / h - kNodeTolerance));
    double linear = 0.0;
    double quadratic = 0.0;
    double prev = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
        const double next = drift.integral(path.grid.x(j + 1));
        const double d = next - prev;
        prev = next;
        if (d == 0.0) continue;
        linear += d * (path.values[j + 1] - path.values[j]);
        quadratic += d * d;
    }
    return (-linear + 0.5 * quadratic) / h;
}

void write_path_csv(std::ostream& out, const BrownianPath& path) {
    out << "h,x_max,seed\n";
    out << std::setprecision(17) << path.grid.step << ',' << path.grid.length << ',' << path.seed << '\n';
    out << "value\n";
    for (double v : path.values) out << v << '\n';
}

BrownianPath read_path_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "h,x_max,seed") throw std::runtime_error("read_path_csv: bad header");
    if (!std::getline(in, line)) throw std::runtime_error("read_path_csv: missing metadata");
    std::istringstream meta(line);
    double h = 0.0;
    double x_max = 0.0;
    std::uint64_t seed = 0;
    char c1 = 0;
    char c2 = 0;
    if (!(meta >> h >> c1 >> x_max >> c2 >> seed) || c1 != ',' || c2 != ',') {
        throw std::runtime_error("read_path_csv: malformed metadata");
    }
    if (!std::getline(in, line) || line != "value") throw std::runtime_error("read_path_csv: missing value header");
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (!line.empty()) values.push_back(std::stod(line));
    }
    BrownianPath p = path_from_values(make_grid(h, x_max), std::move(values));
    p.seed = seed;
    return p;
}

void write_path_binary(std::ostream& out, const BrownianPath& path) {
    out.write(kBinaryMagic, sizeof kBinaryMagic);
    const std::uint64_t n = path.values.size();
    out.write(reinterpret_cast<const char*>(&path.grid.step), sizeof(double));
    out.write(reinterpret_cast<const char*>(&path.grid.length), sizeof(double));
    out.write(reinterpret_cast<const char*>(&path.seed), sizeof(std::uint64_t));
    out.write(reinterpret_cast<const char*>(&n), sizeof(std::uint64_t));
    out.write(reinterpret_cast<const char*>(path.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

BrownianPath read_path_binary(std::istream& in) {
    char magic[sizeof kBinaryMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kBinaryMagic, sizeof magic) != 0) {
        throw std::runtime_error("read_path_binary: bad magic");
    }
    double h = 0.0;
    double x_max = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&h), sizeof h);
    in.read(reinterpret_cast<char*>(&x_max), sizeof x_max);
    in.read(reinterpret_cast<char*>(&seed), sizeof seed);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in) throw std::runtime_error("read_path_binary: truncated header");
    std::vector<double> values(n);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("read_path_binary: truncated values");
    BrownianPath p = path_from_values(make_grid(h, x_max), std::move(values));
    p.seed = seed;
    return p;
}

}  // namespace airy_ldp

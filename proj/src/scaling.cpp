#include "owl/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "owl/errors.hpp"

namespace owl {
namespace {

constexpr double kClip = 10.0;
constexpr double kIndicatorScale = 0.25;

void require_edge_params(double T, double a, int k, int d, double L, std::size_t grid_size) {
    require(T > 0.0 && std::isfinite(T), "edge rescaling: T must be positive");
    require(a > 0.0 && a < 0.5, "edge rescaling: a must lie in (0, 1/2)");
    require(k >= 1 && k <= d, "edge rescaling: k must lie in [1, d]");
    require(L >= 0.0 && std::isfinite(L), "edge rescaling: L must be >= 0");
    require(T - 2.0 * std::pow(T, 1.0 - a / 3.0) * L >= 0.0,
            "edge rescaling: L = " + std::to_string(L) + " reaches before time 0; need L <= T^(a/3) / 2 = " +
                std::to_string(std::pow(T, a / 3.0) / 2.0));
    require(grid_size >= 1, "edge rescaling: grid_size must be at least 1");
}

double edge_value(double s, double T, double a, double t) {
    return std::pow(T, a / 6.0 - 0.5) * (s - 2.0 * std::pow(T, 0.5 + a / 2.0) - 2.0 * std::pow(T, 0.5 + a / 6.0) * t);
}

double horner(const std::vector<double>& c, double w) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * w + *it;
    return v;
}

}  // namespace

SnapshotSet SnapshotSet::from(const WeightedEnsembleSet& set) {
    return {set.d, set.record_times, set.snapshots, set.weights};
}

SnapshotSet SnapshotSet::from(const std::vector<EigenPath>& paths) {
    require(!paths.empty(), "SnapshotSet: no paths");
    SnapshotSet s;
    s.d = paths.front().d;
    s.times = paths.front().times;
    const auto cols = static_cast<Eigen::Index>(s.times.size()) * s.d;
    s.values.resize(static_cast<Eigen::Index>(paths.size()), cols);
    for (std::size_t r = 0; r < paths.size(); ++r) {
        require(paths[r].times == s.times, "SnapshotSet: eigenvalue paths on different time grids");
        s.values.row(static_cast<Eigen::Index>(r)) = paths[r].values.reshaped<Eigen::RowMajor>().transpose();
    }
    return s;
}

SnapshotSet SnapshotSet::from(const std::vector<PathEnsemble>& paths, std::span<const double> times) {
    require(!paths.empty(), "SnapshotSet: no paths");
    SnapshotSet s;
    s.d = paths.front().dim();
    s.times.assign(times.begin(), times.end());
    s.values.resize(static_cast<Eigen::Index>(paths.size()), static_cast<Eigen::Index>(times.size()) * s.d);
    for (std::size_t r = 0; r < paths.size(); ++r) {
        const RowMatrix m = paths[r].positions_at(times);
        s.values.row(static_cast<Eigen::Index>(r)) = m.reshaped<Eigen::RowMajor>().transpose();
    }
    return s;
}

std::size_t SnapshotSet::time_index(double t) const {
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
    throw PreconditionError("source has no snapshot at time " + std::to_string(t) + " (horizon " +
                            std::to_string(horizon()) + ")");
}

std::vector<double> SnapshotSet::normalized_weights() const {
    if (!weights.empty()) return weights;
    return std::vector<double>(size(), 1.0 / static_cast<double>(size()));
}

double default_edge_exponent(int d, double T) {
    require(d >= 2 && T > 1.0, "default_edge_exponent: need d >= 2 and T > 1");
    return std::log(static_cast<double>(d)) / std::log(T);
}

std::vector<double> edge_grid(double L, std::size_t grid_size) {
    if (grid_size == 1) return {0.0};
    return linspace(-L, L, grid_size);
}

std::vector<double> edge_source_times(double T, double a, std::span<const double> grid) {
    std::vector<double> out;
    for (double t : grid) out.push_back(T + 2.0 * std::pow(T, 1.0 - a / 3.0) * t);
    return out;
}

double edge_required_horizon(double T, double a, double L) { return T + 2.0 * std::pow(T, 1.0 - a / 3.0) * L; }

EdgeEnsemble edge_rescale(const SnapshotSet& source, std::size_t replica, double T, double a, int k, double L,
                          std::size_t grid_size) {
    require_edge_params(T, a, k, source.d, L, grid_size);
    const double need = edge_required_horizon(T, a, L);
    require(source.horizon() >= need * (1.0 - 1e-12), "edge rescaling: source horizon " +
                                                          std::to_string(source.horizon()) + " is below the required " +
                                                          std::to_string(need));
    EdgeEnsemble e{T, a, source.d, k, L, edge_grid(L, grid_size), RowMatrix(k, static_cast<Eigen::Index>(grid_size))};
    const auto src = edge_source_times(T, a, e.time_grid);
    for (std::size_t g = 0; g < grid_size; ++g) {
        const std::size_t ti = source.time_index(src[g]);
        for (int i = 0; i < k; ++i)
            e.lines(i, static_cast<Eigen::Index>(g)) =
                edge_value(source.at(replica, ti, source.d - 1 - i), T, a, e.time_grid[g]);
    }
    return e;
}

EdgeEnsemble edge_rescale(const PathEnsemble& source, double T, double a, int k, double L, std::size_t grid_size) {
    require_edge_params(T, a, k, source.dim(), L, grid_size);
    const double need = edge_required_horizon(T, a, L);
    require(source.horizon() >= need, "edge rescaling: source horizon " + std::to_string(source.horizon()) +
                                          " is below the required " + std::to_string(need));
    EdgeEnsemble e{T, a, source.dim(), k, L, edge_grid(L, grid_size), RowMatrix(k, static_cast<Eigen::Index>(grid_size))};
    const auto src = edge_source_times(T, a, e.time_grid);
    for (std::size_t g = 0; g < grid_size; ++g)
        for (int i = 0; i < k; ++i)
            e.lines(i, static_cast<Eigen::Index>(g)) =
                edge_value(source.value_at(source.dim() - 1 - i, std::min(src[g], source.horizon())), T, a, e.time_grid[g]);
    return e;
}

std::vector<EdgeEnsemble> edge_rescale_all(const SnapshotSet& source, double T, double a, int k, double L,
                                           std::size_t grid_size) {
    std::vector<EdgeEnsemble> out;
    out.reserve(source.size());
    for (std::size_t r = 0; r < source.size(); ++r) out.push_back(edge_rescale(source, r, T, a, k, L, grid_size));
    return out;
}

std::vector<double> top_particle_statistic(const SnapshotSet& source, double T, double a) {
    require(T > 0.0, "top_particle_statistic: T must be positive");
    const std::size_t ti = source.time_index(T);
    std::vector<double> out(source.size());
    for (std::size_t r = 0; r < source.size(); ++r) out[r] = edge_value(source.at(r, ti, source.d - 1), T, a, 0.0);
    return out;
}

double top_particle_statistic(const PathEnsemble& source, double T, double a) {
    require(T > 0.0 && source.horizon() >= T, "top_particle_statistic: horizon must be at least T");
    return edge_value(source.value_at(source.dim() - 1, T), T, a, 0.0);
}

void LinearStatisticSpec::validate() const {
    require(delta > 0.0 && delta <= 1.0, "linear statistic: delta must lie in (0, 1]");
    require(!eval_times.empty(), "linear statistic: no evaluation times");
    require(coefficients.size() == eval_times.size(), "linear statistic: one polynomial per evaluation time");
    for (double t : eval_times) require(t >= delta && t <= 1.0, "linear statistic: evaluation times must lie in [delta, 1]");
    for (const auto& c : coefficients) require(c.size() <= 5, "linear statistic: polynomial degree must be at most 4");
}

std::vector<double> LinearStatisticSpec::source_times(double T) const {
    std::vector<double> out;
    for (double t : eval_times) out.push_back(T * t);
    return out;
}

LinearStatisticSpec LinearStatisticSpec::final_square(double delta) { return {{1.0}, {{0.0, 0.0, 1.0}}, delta}; }
LinearStatisticSpec LinearStatisticSpec::constant_one(double delta) { return {{1.0}, {{1.0}}, delta}; }

std::vector<double> linear_statistic(const SnapshotSet& source, const LinearStatisticSpec& spec, double T, double a) {
    spec.validate();
    require(T > 0.0, "linear_statistic: T must be positive");
    const double norm = std::pow(T, -0.5 - a / 2.0);
    std::vector<std::size_t> idx;
    for (double t : spec.source_times(T)) idx.push_back(source.time_index(t));
    std::vector<double> out(source.size(), 0.0);
    for (std::size_t r = 0; r < source.size(); ++r)
        for (int j = 0; j < source.d; ++j)
            for (std::size_t i = 0; i < idx.size(); ++i)
                out[r] += horner(spec.coefficients[i], norm * source.at(r, idx[i], j));
    return out;
}

double WeightedSample::mean() const {
    require(!values.empty(), "WeightedSample: empty sample");
    // Incremental form: a constant sample has exactly its value as mean.
    double m = values.front(), total = weights.empty() ? 1.0 : weights.front();
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        total += w;
        if (total > 0.0) m += w / total * (values[i] - m);
    }
    return m;
}

double WeightedSample::se() const {
    const double m = mean();
    const auto n = static_cast<double>(values.size());
    double s = 0.0;
    if (weights.empty()) {
        if (values.size() < 2) return 0.0;
        for (double v : values) s += (v - m) * (v - m);
        return std::sqrt(s / (n - 1.0) / n);
    }
    for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * weights[i] * (values[i] - m) * (values[i] - m);
    return std::sqrt(s);
}

double WeightedSample::ess() const {
    if (weights.empty()) return static_cast<double>(values.size());
    double s = 0.0;
    for (double w : weights) s += w * w;
    return 1.0 / s;
}

TwoSampleReport two_sample_report(const WeightedSample& a, const WeightedSample& b) {
    require(!a.values.empty() && !b.values.empty(), "two_sample_report: both samples must be nonempty");
    require(a.weights.empty() || a.weights.size() == a.values.size(), "two_sample_report: weight count mismatch");
    require(b.weights.empty() || b.weights.size() == b.values.size(), "two_sample_report: weight count mismatch");
    struct Point {
        double x;
        double wa;
        double wb;
    };
    std::vector<Point> pts;
    pts.reserve(a.values.size() + b.values.size());
    const double ua = 1.0 / static_cast<double>(a.values.size());
    const double ub = 1.0 / static_cast<double>(b.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) pts.push_back({a.values[i], a.weights.empty() ? ua : a.weights[i], 0.0});
    for (std::size_t i = 0; i < b.values.size(); ++i) pts.push_back({b.values[i], 0.0, b.weights.empty() ? ub : b.weights[i]});
    std::sort(pts.begin(), pts.end(), [](const Point& p, const Point& q) { return p.x < q.x; });
    double fa = 0.0, fb = 0.0, ks = 0.0;
    for (std::size_t i = 0; i < pts.size();) {
        std::size_t j = i;
        for (; j < pts.size() && pts[j].x == pts[i].x; ++j) {
            fa += pts[j].wa;
            fb += pts[j].wb;
        }
        ks = std::max(ks, std::abs(fa - fb));
        i = j;
    }
    TwoSampleReport r;
    r.ks = ks;
    r.mean_gap = a.mean() - b.mean();
    r.pooled_se = std::hypot(a.se(), b.se());
    r.ess_a = a.ess();
    r.ess_b = b.ess();
    return r;
}

std::string_view to_string(GMap g) {
    switch (g) {
        case GMap::identity_clipped: return "identity-clipped";
        case GMap::tanh: return "tanh";
        case GMap::smooth_indicator: return "smooth-indicator";
    }
    return "?";
}

GMap g_map_from_name(std::string_view name) {
    for (GMap g : {GMap::identity_clipped, GMap::tanh, GMap::smooth_indicator})
        if (to_string(g) == name) return g;
    throw PreconditionError("unknown g map '" + std::string(name) +
                            "' (expected identity-clipped, tanh or smooth-indicator)");
}

double apply(GMap g, double x) {
    switch (g) {
        case GMap::identity_clipped: return std::clamp(x, -kClip, kClip);
        case GMap::tanh: return std::tanh(x);
        case GMap::smooth_indicator: return 1.0 / (1.0 + std::exp(-x / kIndicatorScale));
    }
    return x;
}

std::vector<double> centered_statistic_samples(const WeightedSample& stat, GMap g) {
    const double m = stat.mean();
    std::vector<double> out;
    out.reserve(stat.values.size());
    for (double v : stat.values) out.push_back(apply(g, v - m));
    return out;
}

}  // namespace owl

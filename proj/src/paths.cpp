#include "owl/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "owl/errors.hpp"
#include "owl/parallel.hpp"

namespace owl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool spacings_exceed(std::span<const double> x, double threshold) {
    for (std::size_t j = 0; j + 1 < x.size(); ++j)
        if (!(x[j + 1] - x[j] > threshold)) return false;
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------

WeylPoint::WeylPoint(std::vector<double> coords) : coords_(std::move(coords)) {
    require(!coords_.empty(), "WeylPoint: dimension must be at least 1");
    for (double c : coords_) require(std::isfinite(c), "WeylPoint: non-finite coordinate");
    for (std::size_t j = 0; j + 1 < coords_.size(); ++j)
        require(coords_[j] < coords_[j + 1], "point is not in the Weyl chamber: x_" + std::to_string(j + 1) +
                                                  " = " + std::to_string(coords_[j]) + " >= x_" +
                                                  std::to_string(j + 2) + " = " + std::to_string(coords_[j + 1]));
}

double WeylPoint::min_spacing() const {
    double m = kInf;
    for (std::size_t j = 0; j + 1 < coords_.size(); ++j) m = std::min(m, coords_[j + 1] - coords_[j]);
    return m;
}

bool WeylPoint::is_ordered(std::span<const double> x) {
    for (std::size_t j = 0; j + 1 < x.size(); ++j)
        if (!(x[j] < x[j + 1])) return false;
    return true;
}

double StoppingTime::time() const {
    if (!time_) throw std::logic_error("stopping time not reached by horizon " + std::to_string(horizon_));
    return *time_;
}

// ---------------------------------------------------------------------------

PathEnsemble::PathEnsemble(std::vector<double> start, double horizon, std::vector<WalkerEvents> walkers)
    : start_(std::move(start)), horizon_(horizon), walkers_(std::move(walkers)) {
    require(!start_.empty(), "PathEnsemble: d must be at least 1");
    require(horizon_ >= 0.0 && std::isfinite(horizon_), "PathEnsemble: horizon must be finite and >= 0");
    require(walkers_.size() == start_.size(), "PathEnsemble: one event list per walker");
    std::vector<double> all;
    for (const auto& w : walkers_) {
        require(w.times.size() == w.values.size(), "PathEnsemble: times and values differ in length");
        for (std::size_t i = 0; i < w.times.size(); ++i) {
            require(w.times[i] > 0.0 && w.times[i] <= horizon_, "PathEnsemble: jump time outside (0, horizon]");
            if (i > 0) require(w.times[i] > w.times[i - 1], "PathEnsemble: jump times must increase strictly");
        }
        all.insert(all.end(), w.times.begin(), w.times.end());
    }
    std::sort(all.begin(), all.end());
    require(std::adjacent_find(all.begin(), all.end()) == all.end(),
            "PathEnsemble: simultaneous jumps of different walkers (RNG misuse?)");
}

PathEnsemble PathEnsemble::from_increments(std::vector<double> start, double horizon,
                                           const std::vector<std::vector<double>>& times,
                                           const std::vector<std::vector<double>>& increments) {
    require(times.size() == start.size() && increments.size() == start.size(),
            "from_increments: one list per walker");
    std::vector<WalkerEvents> walkers(start.size());
    for (std::size_t j = 0; j < start.size(); ++j) {
        require(times[j].size() == increments[j].size(), "from_increments: times/increments length mismatch");
        double v = start[j];
        walkers[j].times = times[j];
        for (double inc : increments[j]) walkers[j].values.push_back(v += inc);
    }
    return PathEnsemble(std::move(start), horizon, std::move(walkers));
}

std::size_t PathEnsemble::total_events() const {
    std::size_t n = 0;
    for (const auto& w : walkers_) n += w.times.size();
    return n;
}

double PathEnsemble::value_at(int j, double t) const {
    require(t >= 0.0 && t <= horizon_, "positions_at: time " + std::to_string(t) + " outside [0, " +
                                           std::to_string(horizon_) + "]");
    const auto& w = walkers_[static_cast<std::size_t>(j)];
    const auto it = std::upper_bound(w.times.begin(), w.times.end(), t);
    if (it == w.times.begin()) return start_[static_cast<std::size_t>(j)];
    return w.values[static_cast<std::size_t>(it - w.times.begin()) - 1];
}

std::vector<double> PathEnsemble::positions_at(double t) const {
    std::vector<double> out(start_.size());
    for (int j = 0; j < dim(); ++j) out[static_cast<std::size_t>(j)] = value_at(j, t);
    return out;
}

RowMatrix PathEnsemble::positions_at(std::span<const double> times) const {
    RowMatrix m(static_cast<Eigen::Index>(times.size()), dim());
    for (std::size_t r = 0; r < times.size(); ++r)
        for (int j = 0; j < dim(); ++j) m(static_cast<Eigen::Index>(r), j) = value_at(j, times[r]);
    return m;
}

// ---------------------------------------------------------------------------

FreeWalk::FreeWalk(std::span<const double> start, const IncrementLaw& law, const RngStream& replica_stream,
                   std::uint32_t generation)
    : law_(&law), pos_(start.begin(), start.end()), next_(start.size(), 0.0) {
    streams_.reserve(start.size());
    for (std::size_t j = 0; j < start.size(); ++j)
        streams_.push_back(replica_stream.lane(lanes::walker(generation, static_cast<std::uint32_t>(j))));
    for (std::size_t j = 0; j < start.size(); ++j) schedule(j);
    alive_ = WeylPoint::is_ordered(pos_);
    if (!alive_) exit_ = 0.0;
}

void FreeWalk::schedule(std::size_t j) {
    next_[j] = now_ + streams_[j].exponential();
}

bool FreeWalk::pair_ok(std::size_t j) const {
    if (j > 0 && !(pos_[j - 1] < pos_[j])) return false;
    if (j + 1 < pos_.size() && !(pos_[j] < pos_[j + 1])) return false;
    return true;
}

bool FreeWalk::advance_in_chamber(double t) {
    if (!alive_) return false;
    const bool stopped = advance(t, [this](double, int j) { return !pair_ok(static_cast<std::size_t>(j)); });
    if (stopped) {
        alive_ = false;
        exit_ = now_;
    }
    return alive_;
}

void FreeWalk::rekey(const RngStream& replica_stream, std::uint32_t generation) {
    for (std::size_t j = 0; j < pos_.size(); ++j) {
        streams_[j] = replica_stream.lane(lanes::walker(generation, static_cast<std::uint32_t>(j)));
        next_[j] = now_ + streams_[j].exponential();
    }
}

PathEnsemble simulate_free(int d, std::span<const double> start, double horizon, const IncrementLaw& law,
                           const RngStream& replica_stream) {
    require(d >= 1, "simulate_free: d must be at least 1");
    require(static_cast<int>(start.size()) == d, "simulate_free: start must have d coordinates");
    require(horizon >= 0.0 && std::isfinite(horizon), "simulate_free: horizon must be finite and >= 0");
    std::vector<WalkerEvents> walkers(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        RngStream s = replica_stream.lane(lanes::walker(0, static_cast<std::uint32_t>(j)));
        auto& w = walkers[static_cast<std::size_t>(j)];
        double t = s.exponential();
        double v = start[static_cast<std::size_t>(j)];
        while (t <= horizon) {
            v += law.sample(s);
            w.times.push_back(t);
            w.values.push_back(v);
            t += s.exponential();
        }
    }
    return PathEnsemble(std::vector<double>(start.begin(), start.end()), horizon, std::move(walkers));
}

// ---------------------------------------------------------------------------

StoppingTime exit_time(const PathEnsemble& ens) {
    std::vector<double> pos(ens.start().begin(), ens.start().end());
    if (!WeylPoint::is_ordered(pos)) return StoppingTime::at(0.0, ens.horizon());
    std::optional<double> hit;
    ens.for_each_jump([&](double t, int j, double v) {
        if (hit) return;
        const auto k = static_cast<std::size_t>(j);
        pos[k] = v;
        if ((k > 0 && pos[k - 1] >= pos[k]) || (k + 1 < pos.size() && pos[k] >= pos[k + 1])) hit = t;
    });
    return hit ? StoppingTime::at(*hit, ens.horizon()) : StoppingTime::beyond(ens.horizon());
}

double w_eps_threshold(double t_scale, double eps) { return std::pow(t_scale, 0.5 - eps); }

bool in_W_eps(std::span<const double> x, double t_scale, double eps) {
    return spacings_exceed(x, w_eps_threshold(t_scale, eps));
}

StoppingTime hitting_time_W_eps(const PathEnsemble& ens, double t_scale, double eps) {
    require(t_scale > 1.0, "hitting_time_W_eps: t_scale must exceed 1");
    require(eps > 0.0 && eps < 0.5, "hitting_time_W_eps: eps must lie in (0, 1/2)");
    const double threshold = w_eps_threshold(t_scale, eps);
    std::vector<double> pos(ens.start().begin(), ens.start().end());
    if (spacings_exceed(pos, threshold)) return StoppingTime::at(0.0, ens.horizon());
    std::optional<double> hit;
    ens.for_each_jump([&](double t, int j, double v) {
        if (hit) return;
        pos[static_cast<std::size_t>(j)] = v;
        if (spacings_exceed(pos, threshold)) hit = t;
    });
    return hit ? StoppingTime::at(*hit, ens.horizon()) : StoppingTime::beyond(ens.horizon());
}

Extrema extrema(const PathEnsemble& ens, double t) {
    require(t >= 0.0 && t <= ens.horizon(), "extrema: t outside [0, horizon]");
    const int d = ens.dim();
    Extrema e{ens.start()[static_cast<std::size_t>(d - 1)], ens.start()[0]};
    const auto& top = ens.walker(d - 1);
    for (std::size_t i = 0; i < top.times.size() && top.times[i] <= t; ++i) e.top_max = std::max(e.top_max, top.values[i]);
    const auto& bottom = ens.walker(0);
    for (std::size_t i = 0; i < bottom.times.size() && bottom.times[i] <= t; ++i)
        e.bottom_min = std::min(e.bottom_min, bottom.values[i]);
    return e;
}

std::vector<MCEstimate> repulsion_probe(std::span<const double> start, const IncrementLaw& law,
                                        std::span<const double> t_values, double delta, std::uint64_t n,
                                        const RngStream& root) {
    require(delta > 0.0 && delta < 0.5, "repulsion_probe: delta must lie in (0, 1/2)");
    require(n >= 2, "repulsion_probe: need n >= 2");
    for (std::size_t k = 0; k < t_values.size(); ++k) {
        require(t_values[k] > 1.0, "repulsion_probe: t values must exceed 1");
        if (k > 0) require(t_values[k] > t_values[k - 1], "repulsion_probe: t values must increase");
    }
    std::vector<MCEstimate> out;
    for (std::size_t k = 0; k < t_values.size(); ++k) {
        const double t = t_values[k];
        const double window = std::pow(t, 1.0 - delta);
        const double threshold = w_eps_threshold(t, delta);
        const auto generation = static_cast<std::uint32_t>(k);
        const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
            FreeWalk walk(start, law, root.replica(r), generation);
            if (!walk.alive() || spacings_exceed(walk.positions(), threshold)) {
                a.add(0.0);
                return;
            }
            const bool stopped = walk.advance(window, [&](double, int j) {
                const auto pos = walk.positions();
                const auto k2 = static_cast<std::size_t>(j);
                if ((k2 > 0 && pos[k2 - 1] >= pos[k2]) || (k2 + 1 < pos.size() && pos[k2] >= pos[k2 + 1])) return true;
                return spacings_exceed(pos, threshold);
            });
            a.add(stopped ? 0.0 : 1.0);
        });
        out.push_back(acc.estimate(root.fingerprint()));
    }
    return out;
}

void write_path_csv(const PathEnsemble& ens, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw PreconditionError("cannot write path CSV '" + path + "'");
    std::fprintf(f, "walker,jump_time,value\n");
    for (int j = 0; j < ens.dim(); ++j) {
        std::fprintf(f, "%d,0,%.17g\n", j + 1, ens.start()[static_cast<std::size_t>(j)]);
        const auto& w = ens.walker(j);
        for (std::size_t i = 0; i < w.times.size(); ++i) std::fprintf(f, "%d,%.17g,%.17g\n", j + 1, w.times[i], w.values[i]);
    }
    std::fclose(f);
}

}  // namespace owl

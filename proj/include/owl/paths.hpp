#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "owl/estimate.hpp"
#include "owl/increments.hpp"
#include "owl/rng.hpp"

namespace owl {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Point of the open Weyl chamber: coordinates strictly increasing.
class WeylPoint {
  public:
    explicit WeylPoint(std::vector<double> coords);

    std::span<const double> coords() const { return coords_; }
    int dim() const { return static_cast<int>(coords_.size()); }
    double operator[](std::size_t i) const { return coords_[i]; }
    /// Smallest adjacent spacing; +inf for d = 1.
    double min_spacing() const;

    static bool is_ordered(std::span<const double> x);

  private:
    std::vector<double> coords_;
};

/// A stopping time observed on [0, horizon]: either a finite time or the
/// marker "not reached by the horizon". The marker is not +inf: it only
/// says the event did not occur up to `horizon`.
class StoppingTime {
  public:
    static StoppingTime at(double t, double horizon) { return StoppingTime(t, horizon); }
    static StoppingTime beyond(double horizon) { return StoppingTime(std::nullopt, horizon); }

    bool reached() const { return time_.has_value(); }
    /// Throws std::logic_error when not reached.
    double time() const;
    double horizon() const { return horizon_; }
    /// True when the event is known to happen after t (t <= horizon).
    bool after(double t) const { return time_ ? *time_ > t : t <= horizon_; }

  private:
    StoppingTime(std::optional<double> t, double horizon) : time_(t), horizon_(horizon) {}
    std::optional<double> time_;
    double horizon_;
};

/// Jump times and post-jump values of one walker.
struct WalkerEvents {
    std::vector<double> times;
    std::vector<double> values;
};

/// d piecewise-constant, right-continuous paths on [0, horizon].
class PathEnsemble {
  public:
    /// Validates per-walker ordering, horizon bounds and cross-walker
    /// distinctness of jump times.
    PathEnsemble(std::vector<double> start, double horizon, std::vector<WalkerEvents> walkers);

    /// Builds from per-walker jump times and increments.
    static PathEnsemble from_increments(std::vector<double> start, double horizon,
                                        const std::vector<std::vector<double>>& times,
                                        const std::vector<std::vector<double>>& increments);

    int dim() const { return static_cast<int>(start_.size()); }
    double horizon() const { return horizon_; }
    std::span<const double> start() const { return start_; }
    const WalkerEvents& walker(int j) const { return walkers_[static_cast<std::size_t>(j)]; }
    std::size_t total_events() const;

    double value_at(int j, double t) const;
    std::vector<double> positions_at(double t) const;
    /// Row r holds the positions at times[r]. Throws for times outside [0, horizon].
    RowMatrix positions_at(std::span<const double> times) const;

    /// Visits every jump in time order: visitor(time, walker, new_value).
    template <class Visitor>
    void for_each_jump(Visitor&& visit) const;

  private:
    std::vector<double> start_;
    double horizon_;
    std::vector<WalkerEvents> walkers_;
};

/// Streaming simulator of d independent rate-1 compound-Poisson walks.
///
/// Walker j draws from lane lanes::walker(generation, j) of the replica stream: an Exp(1)
/// gap, then an increment, per jump. simulate_free uses the same draw order,
/// so a FreeWalk and a stored PathEnsemble built from the same stream agree.
class FreeWalk {
  public:
    FreeWalk(std::span<const double> start, const IncrementLaw& law, const RngStream& replica_stream,
             std::uint32_t generation = 0);

    int dim() const { return static_cast<int>(pos_.size()); }
    double time() const { return now_; }
    std::span<const double> positions() const { return pos_; }
    bool alive() const { return alive_; }
    /// Exit time once the walk has left the chamber.
    std::optional<double> exit_time() const { return exit_; }

    /// Advances to time t calling stop(time, walker) after every jump; when
    /// stop returns true the walk halts at that jump and advance returns true.
    template <class Stop>
    bool advance(double t, Stop&& stop);
    void advance(double t) {
        advance(t, [](double, int) { return false; });
    }

    /// Advances to t and tracks the chamber: stops at the first jump leaving
    /// it (equality counts as leaving). Returns alive().
    bool advance_in_chamber(double t);

    /// Restarts the walker streams of this particle at a new generation
    /// (fresh randomness after resampling); positions and time are kept.
    void rekey(const RngStream& replica_stream, std::uint32_t generation);

  private:
    void schedule(std::size_t j);
    bool pair_ok(std::size_t j) const;

    const IncrementLaw* law_;
    std::vector<double> pos_;
    std::vector<RngStream> streams_;
    std::vector<double> next_;
    double now_ = 0.0;
    bool alive_ = true;
    std::optional<double> exit_;
};

PathEnsemble simulate_free(int d, std::span<const double> start, double horizon, const IncrementLaw& law,
                           const RngStream& replica_stream);

/// τ = first jump time after which some adjacent pair has S_j >= S_{j+1}.
/// 0 when start is not strictly ordered.
StoppingTime exit_time(const PathEnsemble& ens);

/// First time all adjacent spacings exceed t_scale^(1/2 - eps).
StoppingTime hitting_time_W_eps(const PathEnsemble& ens, double t_scale, double eps);

/// Threshold t^(1/2 - eps) defining W_{t,eps}.
double w_eps_threshold(double t_scale, double eps);
bool in_W_eps(std::span<const double> x, double t_scale, double eps);

struct Extrema {
    double top_max;     // sup_{s <= t} S_d(s)
    double bottom_min;  // min_{s <= t} S_1(s)
};
Extrema extrema(const PathEnsemble& ens, double t);

/// Per-t estimate of P(ν_t > t^(1-δ), τ > t^(1-δ)) over n free ensembles.
std::vector<MCEstimate> repulsion_probe(std::span<const double> start, const IncrementLaw& law,
                                        std::span<const double> t_values, double delta, std::uint64_t n,
                                        const RngStream& root);

/// CSV `walker,jump_time,value`, walkers 1-based; each walker's start value is a row at jump_time 0.
void write_path_csv(const PathEnsemble& ens, const std::string& path);

// ---------------------------------------------------------------------------

template <class Visitor>
void PathEnsemble::for_each_jump(Visitor&& visit) const {
    std::vector<std::size_t> cursor(walkers_.size(), 0);
    for (;;) {
        std::size_t best = walkers_.size();
        double best_time = 0.0;
        for (std::size_t j = 0; j < walkers_.size(); ++j) {
            if (cursor[j] < walkers_[j].times.size()) {
                const double t = walkers_[j].times[cursor[j]];
                if (best == walkers_.size() || t < best_time) {
                    best = j;
                    best_time = t;
                }
            }
        }
        if (best == walkers_.size()) return;
        visit(best_time, static_cast<int>(best), walkers_[best].values[cursor[best]]);
        ++cursor[best];
    }
}

template <class Stop>
bool FreeWalk::advance(double t, Stop&& stop) {
    const std::size_t d = pos_.size();
    for (;;) {
        std::size_t j = 0;
        for (std::size_t k = 1; k < d; ++k)
            if (next_[k] < next_[j]) j = k;
        if (d == 0 || next_[j] > t) break;
        now_ = next_[j];
        pos_[j] += law_->sample(streams_[j]);
        schedule(j);
        if (stop(now_, static_cast<int>(j))) return true;
    }
    now_ = t;
    return false;
}

}  // namespace owl

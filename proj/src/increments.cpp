#include "owl/increments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "owl/errors.hpp"
#include "owl/parallel.hpp"

namespace owl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kLaplaceScale = 0.7071067811865476;  // 1/sqrt(2)
constexpr int kMaxRejections = 1'000'000;

double integrate(const auto& f, double a, double b) {
    if (!(b > a)) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, 1e-13);
}

/// ∫_a^b x^k f(x) dx for f linear on [a, b] with end values fa, fb.
double linear_cell_moment(double a, double b, double fa, double fb, int k) {
    const double h = b - a;
    switch (k) {
        case 0:
            return h * (fa + fb) / 2.0;
        case 1:
            return h / 6.0 * (fa * (2 * a + b) + fb * (a + 2 * b));
        default:
            return h / 12.0 * (fa * (3 * a * a + 2 * a * b + b * b) + fb * (a * a + 2 * a * b + 3 * b * b));
    }
}

double grid_moment(std::span<const double> x, std::span<const double> f, int k) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) total += linear_cell_moment(x[i], x[i + 1], f[i], f[i + 1], k);
    return total;
}

/// ∫_a^b f(p) f(p - y) dp for piecewise-linear f: the integrand is quadratic
/// between the nodes of f and of f(· - y), where two-point Gauss is exact.
double grid_convolution(const GridDensity& f, double y, double a, double b) {
    const auto g = f.grid();
    std::vector<double> cuts{a, b};
    for (double x : g) {
        if (x > a && x < b) cuts.push_back(x);
        if (x + y > a && x + y < b) cuts.push_back(x + y);
    }
    std::sort(cuts.begin(), cuts.end());
    const double r = 0.5 / std::numbers::sqrt3;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], h = cuts[i + 1] - lo;
        if (!(h > 0.0)) continue;
        const double p1 = lo + (0.5 - r) * h, p2 = lo + (0.5 + r) * h;
        total += 0.5 * h * (f(p1) * f(p1 - y) + f(p2) * f(p2 - y));
    }
    return total;
}

std::vector<double> refine(std::span<const double> grid) {
    std::vector<double> out;
    out.reserve(2 * grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0) out.push_back(0.5 * (grid[i - 1] + grid[i]));
        out.push_back(grid[i]);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// GridDensity

GridDensity::GridDensity(std::vector<double> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    require(grid_.size() == values_.size(), "GridDensity: grid and values differ in length");
    require(grid_.size() >= 2, "GridDensity: need at least two grid points");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        require(std::isfinite(grid_[i]) && std::isfinite(values_[i]), "GridDensity: non-finite entry");
        require(values_[i] >= 0.0, "GridDensity: negative density value at x=" + std::to_string(grid_[i]));
        if (i > 0) require(grid_[i] > grid_[i - 1], "GridDensity: grid must be strictly increasing");
    }
}

double GridDensity::operator()(double x) const {
    if (grid_.empty() || x < grid_.front() || x > grid_.back()) return 0.0;
    auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    if (it == grid_.end()) return values_.back();
    const std::size_t hi = static_cast<std::size_t>(it - grid_.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - grid_[lo]) / (grid_[hi] - grid_[lo]);
    return values_[lo] + t * (values_[hi] - values_[lo]);
}

double GridDensity::integral() const { return grid_moment(grid_, values_, 0); }

double GridDensity::mean() const { return grid_moment(grid_, values_, 1) / integral(); }

GridDensity GridDensity::normalized() const {
    const double mass = integral();
    require(mass > 0.0, "GridDensity: zero mass cannot be normalized");
    std::vector<double> v(values_);
    for (double& x : v) x /= mass;
    return GridDensity(grid_, std::move(v));
}

bool GridDensity::is_log_concave(double tolerance) const {
    const std::size_t n = grid_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (values_[i] <= 0.0) continue;
        const double li = std::log(values_[i]);
        for (std::size_t j = i + 2; j < n; ++j) {
            if (values_[j] <= 0.0) continue;
            const double mid = (*this)(0.5 * (grid_[i] + grid_[j]));
            if (mid <= 0.0) return false;
            if (std::log(mid) < 0.5 * (li + std::log(values_[j])) - tolerance) return false;
        }
    }
    return true;
}

GridDensity GridDensity::from_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open density CSV '" + path + "'");
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line == "x,f", "density CSV '" + path + "' must start with header 'x,f'");
    std::vector<double> xs, fs;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::istringstream row(line);
        std::string a, b;
        require(std::getline(row, a, ',') && std::getline(row, b), "malformed density CSV row: " + line);
        try {
            xs.push_back(std::stod(a));
            fs.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw PreconditionError("malformed density CSV row: " + line);
        }
    }
    return GridDensity(std::move(xs), std::move(fs));
}

// ---------------------------------------------------------------------------
// IncrementLaw

std::string_view to_string(LawFamily family) {
    switch (family) {
        case LawFamily::gaussian:
            return "gaussian";
        case LawFamily::centered_exponential:
            return "centered-exponential";
        case LawFamily::laplace_normalized:
            return "laplace";
        case LawFamily::uniform_normalized:
            return "uniform";
        case LawFamily::custom_grid:
            return "custom";
    }
    return "?";
}

IncrementLaw IncrementLaw::gaussian() {
    IncrementLaw law;
    law.family_ = LawFamily::gaussian;
    law.name_ = "gaussian";
    law.exp_moment_radius_ = kInf;
    law.lower_ = -kInf;
    law.upper_ = kInf;
    law.compute_moments();
    return law;
}

IncrementLaw IncrementLaw::centered_exponential() {
    IncrementLaw law;
    law.family_ = LawFamily::centered_exponential;
    law.name_ = "centered-exponential";
    law.params_ = {1.0};
    law.exp_moment_radius_ = 1.0;
    law.lower_ = -1.0;
    law.upper_ = kInf;
    law.compute_moments();
    return law;
}

IncrementLaw IncrementLaw::laplace_normalized() {
    IncrementLaw law;
    law.family_ = LawFamily::laplace_normalized;
    law.name_ = "laplace";
    law.params_ = {kLaplaceScale};
    law.exp_moment_radius_ = 1.0 / kLaplaceScale;
    law.lower_ = -kInf;
    law.upper_ = kInf;
    law.compute_moments();
    return law;
}

IncrementLaw IncrementLaw::uniform_normalized() {
    IncrementLaw law;
    law.family_ = LawFamily::uniform_normalized;
    law.name_ = "uniform";
    law.params_ = {kSqrt3};
    law.exp_moment_radius_ = kInf;
    law.lower_ = -kSqrt3;
    law.upper_ = kSqrt3;
    law.compute_moments();
    return law;
}

IncrementLaw IncrementLaw::custom(const GridDensity& density) {
    const auto x = density.grid();
    const auto f = density.values();
    const double mass = grid_moment(x, f, 0);
    require(mass > 0.0, "custom density has zero mass");
    const double m = grid_moment(x, f, 1) / mass;
    const double var = grid_moment(x, f, 2) / mass - m * m;
    require(var > 0.0, "custom density has zero variance");
    const double s = std::sqrt(var);
    std::vector<double> xs(x.size()), fs(f.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = (x[i] - m) / s;
        fs[i] = f[i] * s / mass;
    }
    IncrementLaw law;
    law.family_ = LawFamily::custom_grid;
    law.name_ = "custom";
    law.params_ = {m, s};
    law.custom_ = GridDensity(std::move(xs), std::move(fs));
    law.exp_moment_radius_ = kInf;
    law.lower_ = law.custom_.grid().front();
    law.upper_ = law.custom_.grid().back();
    law.log_concave_ = law.custom_.is_log_concave();
    law.custom_cdf_.assign(law.custom_.size(), 0.0);
    const auto gx = law.custom_.grid();
    const auto gf = law.custom_.values();
    for (std::size_t i = 1; i < gx.size(); ++i)
        law.custom_cdf_[i] = law.custom_cdf_[i - 1] + linear_cell_moment(gx[i - 1], gx[i], gf[i - 1], gf[i], 0);
    law.compute_moments();
    return law;
}

IncrementLaw IncrementLaw::from_name(std::string_view name) {
    if (name == "gaussian") return gaussian();
    if (name == "centered-exponential" || name == "exponential") return centered_exponential();
    if (name == "laplace" || name == "laplace-normalized") return laplace_normalized();
    if (name == "uniform" || name == "uniform-normalized") return uniform_normalized();
    if (name.starts_with("csv:")) return custom(GridDensity::from_csv(std::string(name.substr(4))));
    throw PreconditionError("unknown increment law '" + std::string(name) +
                            "' (expected gaussian, centered-exponential, laplace, uniform or csv:<path>)");
}

std::vector<IncrementLaw> IncrementLaw::builtin() {
    return {gaussian(), centered_exponential(), laplace_normalized(), uniform_normalized()};
}

void IncrementLaw::compute_moments() {
    if (family_ == LawFamily::custom_grid) {
        const double mass = custom_.integral();
        mean_ = grid_moment(custom_.grid(), custom_.values(), 1) / mass;
        variance_ = grid_moment(custom_.grid(), custom_.values(), 2) / mass - mean_ * mean_;
        return;
    }
    const double lo = std::isfinite(lower_) ? lower_ : -40.0;
    const double hi = std::isfinite(upper_) ? upper_ : 40.0;
    auto moment = [&](int k) {
        // Split at 0 so the Laplace kink sits on an endpoint.
        auto g = [&](double x) { return std::pow(x, k) * density(x); };
        return integrate(g, lo, std::min(0.0, hi)) + integrate(g, std::max(0.0, lo), hi);
    };
    mean_ = moment(1);
    variance_ = moment(2) - mean_ * mean_;
}

double IncrementLaw::density(double x) const {
    switch (family_) {
        case LawFamily::gaussian:
            return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        case LawFamily::centered_exponential:
            return x >= -1.0 ? std::exp(-(x + 1.0)) : 0.0;
        case LawFamily::laplace_normalized:
            return std::exp(-std::abs(x) / kLaplaceScale) / (2.0 * kLaplaceScale);
        case LawFamily::uniform_normalized:
            return std::abs(x) <= kSqrt3 ? 1.0 / (2.0 * kSqrt3) : 0.0;
        case LawFamily::custom_grid:
            return custom_(x);
    }
    return 0.0;
}

double IncrementLaw::cdf(double x) const {
    switch (family_) {
        case LawFamily::gaussian:
            return 0.5 * std::erfc(-x / std::numbers::sqrt2);
        case LawFamily::centered_exponential:
            return x >= -1.0 ? -std::expm1(-(x + 1.0)) : 0.0;
        case LawFamily::laplace_normalized:
            return x < 0.0 ? 0.5 * std::exp(x / kLaplaceScale) : 1.0 - 0.5 * std::exp(-x / kLaplaceScale);
        case LawFamily::uniform_normalized:
            return std::clamp((x + kSqrt3) / (2.0 * kSqrt3), 0.0, 1.0);
        case LawFamily::custom_grid: {
            const auto g = custom_.grid();
            const auto f = custom_.values();
            if (x <= g.front()) return 0.0;
            if (x >= g.back()) return custom_cdf_.back();
            const std::size_t hi = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin());
            const std::size_t lo = hi - 1;
            const double y = x - g[lo];
            const double slope = (f[hi] - f[lo]) / (g[hi] - g[lo]);
            return custom_cdf_[lo] + f[lo] * y + 0.5 * slope * y * y;
        }
    }
    return 0.0;
}

double IncrementLaw::sample(RngStream& stream) const {
    switch (family_) {
        case LawFamily::gaussian:
            return stream.normal();
        case LawFamily::centered_exponential:
            return stream.exponential() - 1.0;
        case LawFamily::laplace_normalized: {
            const double e = kLaplaceScale * stream.exponential();
            return (stream.next_u32() & 1u) ? e : -e;
        }
        case LawFamily::uniform_normalized:
            return (2.0 * stream.uniform() - 1.0) * kSqrt3;
        case LawFamily::custom_grid: {
            const auto g = custom_.grid();
            const auto f = custom_.values();
            const double target = stream.uniform() * custom_cdf_.back();
            std::size_t hi = static_cast<std::size_t>(
                std::upper_bound(custom_cdf_.begin(), custom_cdf_.end(), target) - custom_cdf_.begin());
            hi = std::clamp<std::size_t>(hi, 1, g.size() - 1);
            const std::size_t lo = hi - 1;
            const double r = target - custom_cdf_[lo];
            const double slope = (f[hi] - f[lo]) / (g[hi] - g[lo]);
            // Solve f[lo] y + slope y^2 / 2 = r in the stable form.
            const double disc = std::max(0.0, f[lo] * f[lo] + 2.0 * slope * r);
            const double denom = f[lo] + std::sqrt(disc);
            const double y = denom > 0.0 ? 2.0 * r / denom : 0.0;
            return std::min(g[lo] + y, g[hi]);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// ζ construction

double sample_signed_part(const IncrementLaw& law, int sign, RngStream& stream) {
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        const double x = law.sample(stream);
        if (sign > 0 ? x > 0.0 : x < 0.0) return x;
    }
    throw FeasibilityError("degenerate increment law '" + law.name() + "': no " +
                           (sign > 0 ? "positive" : "negative") + " draw in 10^6 attempts");
}

double sample_zeta(const IncrementLaw& law, RngStream& stream) {
    const double pos = sample_signed_part(law, +1, stream);
    const double neg = sample_signed_part(law, -1, stream);
    return pos - neg + 1.0;
}

std::pair<double, double> conditional_means(const IncrementLaw& law) {
    const double p_pos = 1.0 - law.cdf(0.0);
    const double p_neg = law.cdf(0.0);
    require(p_pos > 0.0 && p_neg > 0.0, "law '" + law.name() + "' lacks mass on one half-line");
    double pos = 0.0, neg = 0.0;
    if (law.family() == LawFamily::custom_grid) {
        // Exact on the piecewise-linear density, splitting the cell containing 0.
        const auto g = law.custom_density().grid();
        const auto f = law.custom_density().values();
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            const double a = g[i], b = g[i + 1];
            if (b <= 0.0) {
                neg += linear_cell_moment(a, b, f[i], f[i + 1], 1);
            } else if (a >= 0.0) {
                pos += linear_cell_moment(a, b, f[i], f[i + 1], 1);
            } else {
                const double f0 = law.density(0.0);
                neg += linear_cell_moment(a, 0.0, f[i], f0, 1);
                pos += linear_cell_moment(0.0, b, f0, f[i + 1], 1);
            }
        }
    } else {
        const double hi = std::isfinite(law.support_upper()) ? law.support_upper() : 40.0;
        const double lo = std::isfinite(law.support_lower()) ? law.support_lower() : -40.0;
        pos = integrate([&](double x) { return x * law.density(x); }, 0.0, hi);
        neg = integrate([&](double x) { return x * law.density(x); }, lo, 0.0);
    }
    return {pos / p_pos, neg / p_neg};
}

GridDensity zeta_density(const IncrementLaw& law, std::span<const double> grid) {
    require(grid.size() >= 2, "zeta_density: grid needs at least two points");
    require(grid.front() <= 1.0, "zeta_density: grid must cover [1, ...): first point " +
                                     std::to_string(grid.front()) + " > 1");
    const double p_pos = 1.0 - law.cdf(0.0);
    const double p_neg = law.cdf(0.0);
    require(p_pos > 0.0 && p_neg > 0.0, "zeta_density: law '" + law.name() + "' lacks mass on a half-line");
    const double p_max = law.support_upper();
    const double m_max = -law.support_lower();
    std::vector<double> values(grid.size(), 0.0);
    std::vector<double> xs(grid.begin(), grid.end());
    parallel_for(grid.size(), [&](std::size_t i) {
        const double y = xs[i] - 1.0;
        if (y <= 0.0) return;
        const double a = std::max(0.0, y - m_max);
        const double b = std::min(y, p_max);
        if (!(b > a)) return;
        const double conv = law.family() == LawFamily::custom_grid
                                ? grid_convolution(law.custom_density(), y, a, b)
                                : integrate([&](double p) { return law.density(p) * law.density(p - y); }, a, b);
        values[i] = std::max(0.0, conv / (p_pos * p_neg));
    });
    GridDensity out(std::move(xs), std::move(values));
    const double mass = out.integral();
    if (std::abs(mass - 1.0) > 1e-4)
        throw PreconditionError("zeta_density: grid [" + std::to_string(grid.front()) + ", " +
                                std::to_string(grid.back()) + "] does not cover or resolve ζ (mass " +
                                std::to_string(mass) + ")");
    return out;
}

std::optional<GridDensity> conditioned_tail_density(const IncrementLaw& law, double theta, int side,
                                                    std::span<const double> grid) {
    require(theta >= 0.0, "conditioned tail: θ must be nonnegative");
    const double mass = side > 0 ? 1.0 - law.cdf(theta) : law.cdf(-theta);
    if (mass < 1e-12) return std::nullopt;
    std::vector<double> values(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double y = grid[i];
        if (y < 0.0) continue;
        values[i] = side > 0 ? law.density(theta + y) : law.density(-theta - y);
    }
    GridDensity raw(std::vector<double>(grid.begin(), grid.end()), std::move(values));
    if (raw.integral() <= 0.0) return std::nullopt;
    return raw.normalized();
}

// ---------------------------------------------------------------------------
// Likelihood-ratio order

LrOrderResult lr_order_check(const GridDensity& fU, const GridDensity& fW, double tolerance) {
    require(fU.size() == fW.size() && std::equal(fU.grid().begin(), fU.grid().end(), fW.grid().begin()),
            "lr_order_check: densities must share a grid");
    const auto u = fU.values();
    const auto w = fW.values();
    const auto g = fU.grid();
    LrOrderResult result;
    result.worst_margin = kInf;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = i; j < g.size(); ++j) {
            const double margin = u[i] * w[j] - u[j] * w[i];
            result.worst_margin = std::min(result.worst_margin, margin);
            if (margin < -tolerance && result.holds) {
                result.holds = false;
                result.witness = std::make_pair(g[i], g[j]);
            }
        }
    }
    return result;
}

std::vector<TailLrEntry> conditional_tail_lr_check(const IncrementLaw& law, std::span<const double> thetas,
                                                   std::span<const double> grid, double tolerance) {
    const GridDensity zeta = zeta_density(law, grid);
    const std::vector<double> fine = refine(grid);
    const GridDensity zeta_fine = zeta_density(law, fine);
    std::vector<TailLrEntry> report;
    for (const double theta : thetas) {
        require(theta >= 0.0, "conditional_tail_lr_check: θ must be nonnegative");
        for (const int side : {+1, -1}) {
            TailLrEntry entry;
            entry.theta = theta;
            entry.side = side;
            const auto tail = conditioned_tail_density(law, theta, side, grid);
            const auto tail_fine = conditioned_tail_density(law, theta, side, fine);
            if (!tail || !tail_fine) {
                entry.skipped = true;
                entry.note = "tail mass below 1e-12 at theta=" + std::to_string(theta);
            } else {
                entry.result = lr_order_check(*tail, zeta, tolerance);
                entry.refined = lr_order_check(*tail_fine, zeta_fine, tolerance);
            }
            report.push_back(std::move(entry));
        }
    }
    return report;
}

MCEstimate phi_inequality_check(const IncrementLaw& law, int p, int q, std::uint64_t n, const RngStream& root) {
    require(p >= 0 && q >= 0, "phi_inequality_check: exponents must be nonnegative");
    require(n >= 2, "phi_inequality_check: need n >= 2");
    if (p == 0 && q == 0) return MCEstimate::exact(1.0, n, root.fingerprint());
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        RngStream s = root.replica(r);
        const double u = sample_signed_part(law, +1, s);
        const double w = sample_zeta(law, s);
        a.add(std::pow(w - u, p) * std::pow(w, q));
    });
    return acc.estimate(root.fingerprint());
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
    require(points >= 2, "linspace needs at least two points");
    std::vector<double> out(points);
    for (std::size_t i = 0; i < points; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    out.back() = hi;
    return out;
}

}  // namespace owl

#include "ckspectra/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ckspectra {

namespace {

bool nearly_equal(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<Atom> atoms) {
    if (atoms.empty())
        throw MeasureError("DiscreteMeasure: no atoms");
    for (auto& a : atoms) {
        if (!std::isfinite(a.value) || !std::isfinite(a.weight))
            throw MeasureError("DiscreteMeasure: non-finite atom");
        if (a.value < 0.0) {
            if (a.value > -1e-14)
                a.value = 0.0;  // absorb rounding noise at the origin
            else
                throw MeasureError("DiscreteMeasure: negative atom value");
        }
        if (a.weight <= 0.0)
            throw MeasureError("DiscreteMeasure: non-positive weight");
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.value < b.value; });

    atoms_.reserve(atoms.size());
    for (const auto& a : atoms) {
        if (!atoms_.empty() && nearly_equal(atoms_.back().value, a.value, kMergeTol)) {
            Atom& last = atoms_.back();
            const double w = last.weight + a.weight;
            last.value = (last.value * last.weight + a.value * a.weight) / w;
            last.weight = w;
        } else {
            atoms_.push_back(a);
        }
    }

    const double total = total_weight();
    if (std::abs(total - 1.0) > 1e-12)
        throw MeasureError("DiscreteMeasure: weights sum to " + std::to_string(total) +
                           ", expected 1");
}

double DiscreteMeasure::total_weight() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight;
    return s;
}

double DiscreteMeasure::mean() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.value * a.weight;
    return s;
}

double DiscreteMeasure::second_moment() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.value * a.value * a.weight;
    return s;
}

double DiscreteMeasure::weight_at_zero() const {
    if (atoms_.empty()) return 0.0;
    return atoms_.front().value <= kMergeTol ? atoms_.front().weight : 0.0;
}

double DiscreteMeasure::cdf(double x) const {
    double s = 0.0;
    for (const auto& a : atoms_) {
        if (a.value <= x)
            s += a.weight;
        else
            break;
    }
    return s;
}

DiscreteMeasure affine_pushforward(const DiscreteMeasure& mu, double a2, double b) {
    if (a2 < 0.0)
        throw MeasureError("affine_pushforward: negative scale");
    std::vector<Atom> mapped;
    mapped.reserve(mu.size());
    for (const auto& a : mu.atoms()) {
        const double y = a2 * a.value + b;
        if (y < -1e-14)
            throw MeasureError("affine_pushforward: measure leaves [0,inf)");
        mapped.push_back({std::max(y, 0.0), a.weight});
    }
    return DiscreteMeasure(std::move(mapped));
}

std::complex<double> stieltjes_discrete(const DiscreteMeasure& mu, std::complex<double> z) {
    std::complex<double> s = 0.0;
    for (const auto& a : mu.atoms()) {
        const std::complex<double> d = a.value - z;
        if (std::abs(d) <= DiscreteMeasure::kMergeTol * std::max(1.0, a.value))
            throw MeasureError("stieltjes_discrete: z collides with atom at " +
                               std::to_string(a.value));
        s += a.weight / d;
    }
    return s;
}

DiscreteMeasure CompanionMeasure::measure() const {
    if (!is_proper())
        throw MeasureError("companion: gamma > 1 has no measure form, use the transform");
    std::vector<Atom> atoms;
    atoms.reserve(base.size() + 1);
    if (1.0 - gamma > 0.0)
        atoms.push_back({0.0, 1.0 - gamma});
    for (const auto& a : base.atoms())
        atoms.push_back({a.value, gamma * a.weight});
    return DiscreteMeasure(std::move(atoms));
}

std::complex<double> CompanionMeasure::stieltjes(std::complex<double> z) const {
    return gamma * stieltjes_discrete(base, z) + (1.0 - gamma) * (-1.0 / z);
}

CompanionMeasure companion(const DiscreteMeasure& mu, double gamma) {
    if (!(gamma > 0.0))
        throw MeasureError("companion: gamma must be positive");
    return CompanionMeasure{gamma, mu};
}

BulkLaw::BulkLaw(double zero_mass, std::vector<double> xs, std::vector<double> fs,
                 std::vector<int> segment_of, int discretization_order)
    : zero_mass_(zero_mass), xs_(std::move(xs)), fs_(std::move(fs)),
      segment_of_(std::move(segment_of)) {
    if (zero_mass_ < 0.0 || zero_mass_ > 1.0 + 1e-12)
        throw MeasureError("BulkLaw: zero_mass outside [0,1]");
    zero_mass_ = std::min(zero_mass_, 1.0);
    if (xs_.size() != fs_.size() || xs_.size() != segment_of_.size())
        throw MeasureError("BulkLaw: grid size mismatch");
    for (std::size_t i = 0; i < xs_.size(); ++i) {
        if (!std::isfinite(xs_[i]) || !std::isfinite(fs_[i]))
            throw MeasureError("BulkLaw: non-finite grid entry");
        if (fs_[i] < 0.0) {
            if (fs_[i] < -1e-12) throw MeasureError("BulkLaw: negative density");
            fs_[i] = 0.0;
        }
        if (i > 0 && xs_[i] < xs_[i - 1])
            throw MeasureError("BulkLaw: grid not ascending");
    }
    discretization_ = quantile_discretize(*this, discretization_order);
}

double BulkLaw::grid_mass() const {
    double s = 0.0;
    for (std::size_t i = 1; i < xs_.size(); ++i) {
        if (segment_of_[i] != segment_of_[i - 1]) continue;
        s += 0.5 * (fs_[i] + fs_[i - 1]) * (xs_[i] - xs_[i - 1]);
    }
    return s;
}

double BulkLaw::mean() const {
    double s = 0.0;
    for (std::size_t i = 1; i < xs_.size(); ++i) {
        if (segment_of_[i] != segment_of_[i - 1]) continue;
        s += 0.5 * (fs_[i] * xs_[i] + fs_[i - 1] * xs_[i - 1]) * (xs_[i] - xs_[i - 1]);
    }
    return s;
}

double BulkLaw::second_moment() const {
    double s = 0.0;
    for (std::size_t i = 1; i < xs_.size(); ++i) {
        if (segment_of_[i] != segment_of_[i - 1]) continue;
        s += 0.5 * (fs_[i] * xs_[i] * xs_[i] + fs_[i - 1] * xs_[i - 1] * xs_[i - 1]) *
             (xs_[i] - xs_[i - 1]);
    }
    return s;
}

void BulkLaw::check_normalization(double tol) const {
    const double total = zero_mass_ + grid_mass();
    if (std::abs(total - 1.0) > tol)
        throw MeasureError("BulkLaw: total mass " + std::to_string(total));
}

double BulkLaw::density_at(double x) const {
    if (xs_.empty() || x < xs_.front() || x > xs_.back()) return 0.0;
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    if (it == xs_.begin()) return fs_.front();
    const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
    if (i == xs_.size()) return fs_.back();
    if (segment_of_[i] != segment_of_[i - 1]) return 0.0;  // x falls in a gap
    const double t = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
    return (1.0 - t) * fs_[i - 1] + t * fs_[i];
}

std::complex<double> BulkLaw::stieltjes(std::complex<double> z) const {
    std::complex<double> s = zero_mass_ * (-1.0 / z);
    for (std::size_t i = 1; i < xs_.size(); ++i) {
        if (segment_of_[i] != segment_of_[i - 1]) continue;
        const std::complex<double> g0 = fs_[i - 1] / (xs_[i - 1] - z);
        const std::complex<double> g1 = fs_[i] / (xs_[i] - z);
        s += 0.5 * (g0 + g1) * (xs_[i] - xs_[i - 1]);
    }
    return s;
}

CompanionBulk companion(const BulkLaw& law, double gamma) {
    if (!(gamma > 0.0))
        throw MeasureError("companion: gamma must be positive");
    return CompanionBulk{gamma, &law};
}

std::complex<double> CompanionBulk::stieltjes(std::complex<double> z) const {
    return gamma * base->stieltjes(z) + (1.0 - gamma) * (-1.0 / z);
}

namespace {

// Piecewise-linear density cells with closed-form mass and first moment.
struct Cell {
    double x0, x1, f0, f1;
    double mass() const { return 0.5 * (f0 + f1) * (x1 - x0); }
    double moment() const {
        const double h = x1 - x0;
        return h * (f0 * (2.0 * x0 + x1) + f1 * (x0 + 2.0 * x1)) / 6.0;
    }
    // Sub-cell [x0, x] obtained by interpolating f linearly.
    Cell head(double x) const {
        const double t = (x - x0) / (x1 - x0);
        return {x0, x, f0, (1.0 - t) * f0 + t * f1};
    }
    Cell tail(double x) const {
        const double t = (x - x0) / (x1 - x0);
        return {x, x1, (1.0 - t) * f0 + t * f1, f1};
    }
    // Solve for x with head-mass = target (quadratic in x).
    double split_at_mass(double target) const {
        const double h = x1 - x0;
        const double slope = (f1 - f0) / h;
        if (std::abs(slope) < 1e-300) {
            return f0 > 0.0 ? x0 + target / f0 : x1;
        }
        // 0.5*slope*u^2 + f0*u - target = 0, u = x - x0
        const double disc = f0 * f0 + 2.0 * slope * target;
        const double sq = std::sqrt(std::max(disc, 0.0));
        double u = slope > 0.0 ? (-f0 + sq) / slope : (-f0 + sq) / slope;
        if (!(u >= 0.0) || u > h) u = std::clamp(target / std::max(0.5 * (f0 + f1), 1e-300), 0.0, h);
        return x0 + u;
    }
};

}  // namespace

DiscreteMeasure quantile_discretize(const BulkLaw& law, int M) {
    if (M < 16)
        throw MeasureError("quantile_discretize: M must be at least 16");

    std::vector<Cell> cells;
    const auto& xs = law.xs();
    const auto& fs = law.fs();
    const auto& seg = law.segment_of();
    double raw_mass = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (seg[i] != seg[i - 1]) continue;
        Cell c{xs[i - 1], xs[i], fs[i - 1], fs[i]};
        if (c.x1 > c.x0 && (c.f0 > 0.0 || c.f1 > 0.0)) {
            cells.push_back(c);
            raw_mass += c.mass();
        }
    }

    const double continuous_mass = 1.0 - law.zero_mass();
    if (cells.empty() || raw_mass <= 1e-12 || continuous_mass <= 1e-12) {
        // Degenerate: everything sits in the zero atom.
        return DiscreteMeasure::point_mass(0.0);
    }

    // Normalize cell densities so the grid carries exactly 1 - zero_mass.
    const double scale = continuous_mass / raw_mass;
    for (auto& c : cells) { c.f0 *= scale; c.f1 *= scale; }

    const double slice_mass = continuous_mass / M;
    std::vector<Atom> atoms;
    atoms.reserve(static_cast<std::size_t>(M) + 1);
    if (law.zero_mass() > 0.0)
        atoms.push_back({0.0, law.zero_mass()});

    std::size_t ci = 0;
    Cell cur = cells[0];
    double need = slice_mass;
    double acc_mass = 0.0, acc_moment = 0.0;
    int produced = 0;
    while (produced < M) {
        const double cm = cur.mass();
        if (cm >= need - 1e-15 * slice_mass && cm > 0.0) {
            const double xsplit = cur.split_at_mass(need);
            const Cell h = cur.head(xsplit);
            acc_mass += h.mass();
            acc_moment += h.moment();
            const double value = acc_moment / std::max(acc_mass, 1e-300);
            atoms.push_back({std::max(value, 0.0), slice_mass});
            ++produced;
            cur = cur.tail(xsplit);
            need = slice_mass;
            acc_mass = 0.0;
            acc_moment = 0.0;
            if (produced == M) break;
        } else {
            acc_mass += cm;
            acc_moment += cur.moment();
            need -= cm;
            ++ci;
            if (ci >= cells.size()) {
                // Rounding left a sliver: close the final slice with what we have.
                if (acc_mass > 0.0)
                    atoms.push_back({std::max(acc_moment / acc_mass, 0.0), slice_mass});
                else
                    atoms.push_back({cells.back().x1, slice_mass});
                ++produced;
                while (produced < M) {  // should not happen, keep mass exact
                    atoms.push_back({cells.back().x1, slice_mass});
                    ++produced;
                }
                break;
            }
            cur = cells[ci];
        }
    }

    return DiscreteMeasure(std::move(atoms));
}

}  // namespace ckspectra

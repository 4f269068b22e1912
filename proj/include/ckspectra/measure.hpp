#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckspectra {

class MeasureError : public std::runtime_error {
public:
    explicit MeasureError(const std::string& what) : std::runtime_error(what) {}
};

struct Atom {
    double value = 0.0;
    double weight = 0.0;
};

/// Probability measure on [0, inf) made of finitely many weighted atoms.
/// Atoms are kept sorted by value; values closer than the relative merge
/// tolerance are collapsed into a single atom at their weighted mean.
class DiscreteMeasure {
public:
    static constexpr double kMergeTol = 1e-12;

    DiscreteMeasure() = default;
    explicit DiscreteMeasure(std::vector<Atom> atoms);

    static DiscreteMeasure point_mass(double value) {
        return DiscreteMeasure({{value, 1.0}});
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    bool empty() const { return atoms_.empty(); }

    double total_weight() const;
    double mean() const;
    double second_moment() const;
    double min_value() const { return atoms_.front().value; }
    double max_value() const { return atoms_.back().value; }
    /// Mass sitting exactly at 0 (atom merged within kMergeTol of 0).
    double weight_at_zero() const;

    /// P[X <= x]
    double cdf(double x) const;

private:
    std::vector<Atom> atoms_;
};

/// Law of a2*x + b under mu. Errors out if any atom would leave [0, inf).
DiscreteMeasure affine_pushforward(const DiscreteMeasure& mu, double a2, double b);

/// sum_j w_j / (x_j - z). Throws on pole collision.
std::complex<double> stieltjes_discrete(const DiscreteMeasure& mu, std::complex<double> z);

/// gamma*mu + (1-gamma)*delta_0. For gamma > 1 the convex combination does
/// not exist as a measure; the object keeps (gamma, mu) and exposes only the
/// transform m_tilde(z) = gamma*m(z) + (1-gamma)*(-1/z).
struct CompanionMeasure {
    double gamma = 1.0;
    DiscreteMeasure base;

    bool is_proper() const { return gamma <= 1.0 + 1e-15; }
    DiscreteMeasure measure() const;
    std::complex<double> stieltjes(std::complex<double> z) const;
};

CompanionMeasure companion(const DiscreteMeasure& mu, double gamma);

/// Absolutely continuous spectral law on a union of intervals, sampled on a
/// grid, plus an explicit point mass at 0. Carries an equal-mass quantile
/// discretization so it can serve as the population measure of the next
/// layer.
class BulkLaw {
public:
    BulkLaw() = default;

    /// xs ascending; segment_of[i] indexes the support interval of xs[i]
    /// (integration never crosses segment boundaries).
    BulkLaw(double zero_mass, std::vector<double> xs, std::vector<double> fs,
            std::vector<int> segment_of, int discretization_order);

    double zero_mass() const { return zero_mass_; }
    const std::vector<double>& xs() const { return xs_; }
    const std::vector<double>& fs() const { return fs_; }
    const std::vector<int>& segment_of() const { return segment_of_; }
    const DiscreteMeasure& discretization() const { return discretization_; }

    /// Trapezoid mass of the density grid (excludes the zero atom).
    double grid_mass() const;
    double mean() const;
    double second_moment() const;
    /// zero_mass + grid_mass within tol of 1, density nonnegative.
    void check_normalization(double tol = 1e-3) const;

    /// Linear interpolation inside segments, 0 elsewhere.
    double density_at(double x) const;
    /// zero_mass*(-1/z) + trapezoid integral of f(x)/(x-z).
    std::complex<double> stieltjes(std::complex<double> z) const;

    double support_min() const { return xs_.empty() ? 0.0 : xs_.front(); }
    double support_max() const { return xs_.empty() ? 0.0 : xs_.back(); }

private:
    double zero_mass_ = 0.0;
    std::vector<double> xs_;
    std::vector<double> fs_;
    std::vector<int> segment_of_;
    DiscreteMeasure discretization_;
};

/// Equal-mass slicing of the continuous part into M atoms placed at the
/// conditional mean of each slice; the zero atom is carried through
/// explicitly. A degenerate grid (all mass in the atom) yields the atom
/// alone.
DiscreteMeasure quantile_discretize(const BulkLaw& law, int M);

struct CompanionBulk {
    double gamma = 1.0;
    const BulkLaw* base = nullptr;

    bool is_proper() const { return gamma <= 1.0 + 1e-15; }
    std::complex<double> stieltjes(std::complex<double> z) const;
};

CompanionBulk companion(const BulkLaw& law, double gamma);

}  // namespace ckspectra

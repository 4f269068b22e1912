#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ckspectra/measure.hpp"

namespace ckspectra {

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double last_residual = 0.0)
        : std::runtime_error(what), last_residual(last_residual) {}
    double last_residual;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
    bool contains(double x, double pad = 0.0) const { return x >= lo - pad && x <= hi + pad; }
};

struct StieltjesPoint {
    std::complex<double> z;
    std::complex<double> m;        // Stieltjes transform of mu
    std::complex<double> m_tilde;  // companion: gamma*m + (1-gamma)*(-1/z)
    double residual = 0.0;
};

/// A maximal interval (m_lo, m_hi) where z'(m) > 0; its image
/// (x_lo, x_hi) under z is a component of the complement of supp(mu~).
struct BijectionPiece {
    double m_lo, m_hi;
    double x_lo, x_hi;
};

struct MpSolverOptions {
    int probes_per_interval = 64;
    double bisect_tol = 1e-9;        // in m, relative to interval scale
    double merge_tol = 1e-6;         // support intervals closer than this merge
    double fp_tol = 1e-12;           // fixed-point residual target
    int max_iterations = 10000;
    bool check_bijection = true;     // probe-grid direction check at build
};

/// mu = rho^MP_gamma boxtimes nu for a discrete population measure nu.
/// Support intervals are located at construction from the sign of z'(m)
/// between the poles of z (Silverstein-Choi inverse-function method).
class DeformedMPLaw {
public:
    using Options = MpSolverOptions;

    DeformedMPLaw(double gamma, DiscreteMeasure nu, Options opts = Options());

    double gamma() const { return gamma_; }
    const DiscreteMeasure& nu() const { return nu_; }
    const Options& options() const { return opts_; }

    /// {0} union {-1/lambda : lambda positive atom of nu}, ascending.
    const std::vector<double>& poles() const { return poles_; }
    const std::vector<Interval>& support() const { return support_; }
    const std::vector<BijectionPiece>& bijection_pieces() const { return pieces_; }

    double mu_zero_mass() const { return mu_zero_mass_; }
    double companion_zero_mass() const { return companion_zero_mass_; }
    double support_sup() const { return support_.back().hi; }
    double support_inf() const { return support_.front().lo; }

    /// Distance to the positive support intervals only.
    double dist_to_support(double x) const;
    /// Distance to supp(mu) union {0} (the set outliers are measured against).
    double dist_to_spectrum(double x) const;

    double z_of_m(double m) const;
    std::complex<double> z_of_m(std::complex<double> m) const;
    double z_prime(double m) const;
    std::complex<double> z_prime(std::complex<double> m) const;

    /// Marchenko-Pastur fixed point at complex z (Im z != 0).
    StieltjesPoint stieltjes(std::complex<double> z) const;
    /// Real spectral argument off supp(mu) union {0}: epsilon-continuation
    /// from z + i*1e-3 followed by a real Newton polish; verifies
    /// z(m_tilde) = x and z'(m_tilde) > 0.
    StieltjesPoint stieltjes_real(double x) const;

    /// Density on caller-provided abscissae by Stieltjes inversion with
    /// Richardson steps eta, eta/2.
    BulkLaw density_grid(std::span<const double> xs, double eta, int M = 2000) const;
    /// Density on an automatically clustered grid covering the support.
    BulkLaw make_bulk_law(int grid_points = 1200, double eta = 1e-5, int M = 2000) const;

private:
    void compute_support();
    std::complex<double> solve_fixed_point(std::complex<double> z,
                                           std::complex<double> m0) const;

    double gamma_;
    DiscreteMeasure nu_;
    Options opts_;
    std::vector<double> poles_;
    std::vector<Interval> support_;
    std::vector<BijectionPiece> pieces_;
    double mu_zero_mass_ = 0.0;
    double companion_zero_mass_ = 0.0;
};

}  // namespace ckspectra

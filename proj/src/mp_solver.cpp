#include "ckspectra/mp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ckspectra {

namespace {

constexpr double kHuge = std::numeric_limits<double>::infinity();

enum class EndKind { NegInf, PosInf, AtomPole, ZeroPoleLeft, ZeroPoleRight };

// Limit of z at a segment endpoint that is not a finite critical point.
double z_limit(EndKind kind) {
    switch (kind) {
        case EndKind::NegInf: return 0.0;        // z -> 0 as m -> -inf
        case EndKind::PosInf: return 0.0;        // z -> 0 as m -> +inf
        case EndKind::AtomPole: return kHuge;    // unused for increasing runs
        case EndKind::ZeroPoleLeft: return kHuge;   // m -> 0^-: z -> +inf
        case EndKind::ZeroPoleRight: return -kHuge;  // m -> 0^+: z -> -inf
    }
    return 0.0;
}

}  // namespace

DeformedMPLaw::DeformedMPLaw(double gamma, DiscreteMeasure nu, Options opts)
    : gamma_(gamma), nu_(std::move(nu)), opts_(opts) {
    if (!(gamma_ > 0.0))
        throw SolverError("DeformedMPLaw: gamma must be positive");

    const double w0 = nu_.weight_at_zero();
    mu_zero_mass_ = std::max(0.0, 1.0 - std::min(1.0 / gamma_, 1.0 - w0));
    companion_zero_mass_ = std::max(0.0, 1.0 - gamma_ * (1.0 - w0));

    poles_.clear();
    for (const auto& a : nu_.atoms())
        if (a.value > DiscreteMeasure::kMergeTol) poles_.push_back(-1.0 / a.value);
    poles_.push_back(0.0);
    std::sort(poles_.begin(), poles_.end());

    compute_support();
}

double DeformedMPLaw::z_of_m(double m) const {
    double s = -1.0 / m;
    for (const auto& a : nu_.atoms()) {
        if (a.value <= DiscreteMeasure::kMergeTol) continue;
        s += gamma_ * a.weight * a.value / (1.0 + a.value * m);
    }
    return s;
}

std::complex<double> DeformedMPLaw::z_of_m(std::complex<double> m) const {
    std::complex<double> s = -1.0 / m;
    for (const auto& a : nu_.atoms()) {
        if (a.value <= DiscreteMeasure::kMergeTol) continue;
        s += gamma_ * a.weight * a.value / (1.0 + a.value * m);
    }
    return s;
}

double DeformedMPLaw::z_prime(double m) const {
    double s = 1.0 / (m * m);
    for (const auto& a : nu_.atoms()) {
        if (a.value <= DiscreteMeasure::kMergeTol) continue;
        const double d = 1.0 + a.value * m;
        s -= gamma_ * a.weight * a.value * a.value / (d * d);
    }
    return s;
}

std::complex<double> DeformedMPLaw::z_prime(std::complex<double> m) const {
    std::complex<double> s = 1.0 / (m * m);
    for (const auto& a : nu_.atoms()) {
        if (a.value <= DiscreteMeasure::kMergeTol) continue;
        const std::complex<double> d = 1.0 + a.value * m;
        s -= gamma_ * a.weight * a.value * a.value / (d * d);
    }
    return s;
}

double DeformedMPLaw::dist_to_support(double x) const {
    double d = kHuge;
    for (const auto& iv : support_) {
        if (x >= iv.lo && x <= iv.hi) return 0.0;
        d = std::min(d, std::min(std::abs(x - iv.lo), std::abs(x - iv.hi)));
    }
    return d;
}

double DeformedMPLaw::dist_to_spectrum(double x) const {
    return std::min(dist_to_support(x), std::abs(x));
}

namespace {

struct Segment {
    double a, b;  // finite endpoints; +-inf encoded by EndKind
    EndKind a_kind, b_kind;
    std::size_t left_pole = 0;  // index into poles_ for bounded segments
};

}  // namespace

void DeformedMPLaw::compute_support() {
    const double lambda_max = nu_.max_value();
    double lambda_min_pos = lambda_max;
    for (const auto& a : nu_.atoms())
        if (a.value > DiscreteMeasure::kMergeTol) {
            lambda_min_pos = a.value;
            break;
        }

    std::vector<Segment> segments;
    segments.push_back({0.0, poles_.front(), EndKind::NegInf, EndKind::AtomPole, 0});
    for (std::size_t i = 0; i + 1 < poles_.size(); ++i) {
        const EndKind right =
            (poles_[i + 1] == 0.0) ? EndKind::ZeroPoleLeft : EndKind::AtomPole;
        segments.push_back({poles_[i], poles_[i + 1], EndKind::AtomPole, right, i});
    }
    segments.push_back({0.0, 0.0, EndKind::ZeroPoleRight, EndKind::PosInf, 0});
    if (poles_.size() == 1) {
        // nu is a pure atom at zero: only the two tails around the 0 pole.
        segments.clear();
        segments.push_back({0.0, 0.0, EndKind::NegInf, EndKind::ZeroPoleLeft, 0});
        segments.push_back({0.0, 0.0, EndKind::ZeroPoleRight, EndKind::PosInf, 0});
    }

    pieces_.clear();

    // Weight of the atom owning each pole; ascending atoms have ascending
    // poles -1/lambda, and the final origin pole carries no atom.
    std::vector<double> pole_weight(poles_.size(), 0.0);
    {
        std::size_t k = 0;
        for (const auto& atom : nu_.atoms()) {
            if (atom.value <= DiscreteMeasure::kMergeTol) continue;
            if (k < poles_.size()) pole_weight[k++] = atom.weight;
        }
    }

    // Cheap prefilter for bounded inter-pole intervals: dropping all atom
    // terms except the two neighbours only raises z', so a negative
    // three-term bound over the interval rules out any increasing piece.
    const auto interval_can_increase = [&](std::size_t idx) {
        const double a = poles_[idx], b = poles_[idx + 1];
        const double la = -1.0 / a;                      // atom owning the left pole
        const double lb = b < 0.0 ? -1.0 / b : 0.0;      // 0 means the origin pole
        const double wa = pole_weight[idx];
        const double wb = b < 0.0 ? pole_weight[idx + 1] : 0.0;
        const double len = b - a;
        const auto bound = [&](double m) {
            double v = 1.0 / (m * m);
            const double da = 1.0 + la * m;
            v -= gamma_ * wa * la * la / (da * da);
            if (lb > 0.0) {
                const double db = 1.0 + lb * m;
                v -= gamma_ * wb * lb * lb / (db * db);
            }
            return v;
        };
        for (int i = 1; i <= 16; ++i)
            if (bound(a + len * i / 17.0) > 0.0) return true;
        for (int k = 2; k <= 8; ++k) {
            const double off = len * std::pow(0.5, k);
            if (bound(a + off) > 0.0 || bound(b - off) > 0.0) return true;
        }
        return false;
    };

    for (const auto& seg : segments) {
        if (seg.a_kind == EndKind::AtomPole && seg.b_kind != EndKind::PosInf &&
            !interval_can_increase(seg.left_pole))
            continue;

        std::vector<double> probes;
        if (seg.a_kind == EndKind::NegInf) {
            const double p = seg.b;
            const double scale = std::max(1.0, std::abs(p));
            for (int k = 0; k < 72; ++k) {
                const double off = scale * std::pow(10.0, -9.0 + 18.0 * k / 71.0);
                probes.push_back(p - off);
            }
            std::sort(probes.begin(), probes.end());
        } else if (seg.b_kind == EndKind::PosInf) {
            const double lo = 1e-12 / (1.0 + lambda_max);
            const double hi = 1e12 * (1.0 + 1.0 / lambda_min_pos);
            const double llo = std::log10(lo), lhi = std::log10(hi);
            for (int k = 0; k < 96; ++k)
                probes.push_back(std::pow(10.0, llo + (lhi - llo) * k / 95.0));
        } else {
            const double a = seg.a, b = seg.b, len = b - a;
            if (!(len > 0.0)) continue;
            const int P = std::max(8, opts_.probes_per_interval);
            for (int i = 1; i <= P; ++i) probes.push_back(a + len * i / (P + 1.0));
            for (int k = 2; k <= 30; ++k) {
                const double off = len * std::pow(0.5, k);
                probes.push_back(a + off);
                probes.push_back(b - off);
            }
            std::sort(probes.begin(), probes.end());
        }

        std::vector<double> vals(probes.size());
        for (std::size_t i = 0; i < probes.size(); ++i) vals[i] = z_prime(probes[i]);

        // Sign crossings -> critical points by bisection.
        std::vector<double> crossings;
        std::vector<std::size_t> cross_after;  // probe index left of each crossing
        for (std::size_t i = 0; i + 1 < probes.size(); ++i) {
            if (!(vals[i] == 0.0) && !(vals[i + 1] == 0.0) &&
                std::signbit(vals[i]) == std::signbit(vals[i + 1]))
                continue;
            double lo = probes[i], hi = probes[i + 1];
            double flo = vals[i];
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = z_prime(mid);
                if ((fm <= 0.0) == (flo <= 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if (hi - lo <= opts_.bisect_tol * std::max(1.0, std::abs(mid))) break;
            }
            crossings.push_back(0.5 * (lo + hi));
            cross_after.push_back(i);
        }

        // Maximal runs of positive sign define the bijection pieces.
        std::size_t idx = 0;
        while (idx < probes.size()) {
            if (vals[idx] <= 0.0) {
                ++idx;
                continue;
            }
            std::size_t run_end = idx;
            while (run_end + 1 < probes.size() && vals[run_end + 1] > 0.0) ++run_end;

            BijectionPiece piece;
            // Left boundary: crossing just before the run, else segment end.
            const double* cl = nullptr;
            for (std::size_t c = 0; c < crossings.size(); ++c)
                if (cross_after[c] + 1 == idx) cl = &crossings[c];
            const double* cr = nullptr;
            for (std::size_t c = 0; c < crossings.size(); ++c)
                if (cross_after[c] == run_end) cr = &crossings[c];

            if (cl) {
                piece.m_lo = *cl;
                piece.x_lo = z_of_m(*cl);
            } else {
                piece.m_lo = probes[idx];
                piece.x_lo = z_limit(seg.a_kind);
            }
            if (cr) {
                piece.m_hi = *cr;
                piece.x_hi = z_of_m(*cr);
            } else {
                piece.m_hi = probes[run_end];
                piece.x_hi = z_limit(seg.b_kind);
            }
            if (std::isfinite(piece.x_lo) || std::isfinite(piece.x_hi)) {
                if (piece.x_hi > piece.x_lo) pieces_.push_back(piece);
            } else if (piece.x_lo == -kHuge && piece.x_hi == kHuge) {
                pieces_.push_back(piece);
            }
            idx = run_end + 1;
        }
    }

    if (pieces_.empty()) {
        std::ostringstream oss;
        oss << "compute_support: no increasing pieces found (gamma=" << gamma_
            << ", atoms=" << nu_.size() << "); z' samples:";
        for (double m : {-10.0, -2.0, -0.5, 0.5, 2.0, 10.0}) oss << " z'(" << m << ")=" << z_prime(m);
        throw SolverError(oss.str());
    }

    // Complement of the union of piece images = supp(mu~).
    std::vector<Interval> gaps;
    gaps.reserve(pieces_.size());
    for (const auto& p : pieces_) gaps.push_back({p.x_lo, p.x_hi});
    std::sort(gaps.begin(), gaps.end(),
              [](const Interval& u, const Interval& v) { return u.lo < v.lo; });
    std::vector<Interval> merged;
    for (const auto& g : gaps) {
        if (!merged.empty() && g.lo <= merged.back().hi + 1e-14 * std::max(1.0, std::abs(g.lo))) {
            merged.back().hi = std::max(merged.back().hi, g.hi);
        } else {
            merged.push_back(g);
        }
    }

    support_.clear();
    for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
        Interval iv{merged[i].hi, merged[i + 1].lo};
        if (iv.hi <= 0.0) continue;  // spectrum lives on [0, inf)
        iv.lo = std::max(iv.lo, 0.0);
        if (iv.length() <= opts_.merge_tol) {
            if (iv.lo > opts_.merge_tol) {
                // keep zero-length fragments away from the origin as points
                support_.push_back(iv);
            }
            continue;
        }
        support_.push_back(iv);
    }

    // Merge support intervals separated by sub-tolerance gaps.
    if (!support_.empty()) {
        std::vector<Interval> out;
        out.push_back(support_.front());
        for (std::size_t i = 1; i < support_.size(); ++i) {
            if (support_[i].lo - out.back().hi <= opts_.merge_tol)
                out.back().hi = support_[i].hi;
            else
                out.push_back(support_[i]);
        }
        support_ = std::move(out);
    }
    if (support_.empty()) support_.push_back({0.0, 0.0});

    // Upper bound sanity: edge of rho_gamma boxtimes nu is below
    // lambda_max*(1+sqrt(gamma))^2.
    const double bound =
        nu_.max_value() * (1.0 + std::sqrt(gamma_)) * (1.0 + std::sqrt(gamma_));
    if (support_sup() > bound * (1.0 + 1e-9) + 1e-12)
        throw SolverError("compute_support: edge exceeds MP bound");

    if (opts_.check_bijection) {
        // Direction check on a probe grid: gap midpoints must verify
        // z(m) = x with z'(m) > 0 inside the recorded pieces. Fragments
        // below the merge tolerance never reach the reported support, so
        // they are not checked.
        for (const auto& p : pieces_) {
            if (!std::isfinite(p.x_lo) || !std::isfinite(p.x_hi)) continue;
            if (!(p.m_hi > p.m_lo)) continue;
            if (p.x_hi - p.x_lo <= opts_.merge_tol) continue;
            if (p.m_hi - p.m_lo <= 1e-12 * std::max(1.0, std::abs(p.m_lo))) continue;
            const double x = 0.5 * (p.x_lo + p.x_hi);
            double lo = p.m_lo, hi = p.m_hi;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (z_of_m(mid) < x)
                    lo = mid;
                else
                    hi = mid;
            }
            const double m = 0.5 * (lo + hi);
            if (!(z_prime(m) > 0.0))
                throw SolverError("compute_support: direction check failed in a gap");
        }
    }
}

// Iterates the companion transform: m~ <- -1/(z - gamma Int lambda/(1+lambda m~)).
// The map sends C+ to C+, so the iteration cannot leave the physical branch.
std::complex<double> DeformedMPLaw::solve_fixed_point(std::complex<double> z,
                                                      std::complex<double> m0) const {
    const auto F = [&](std::complex<double> mt) {
        std::complex<double> integral = 0.0;
        for (const auto& a : nu_.atoms())
            integral += a.weight * a.value / (1.0 + a.value * mt);
        return -1.0 / (z - gamma_ * integral);
    };

    const double tol = opts_.fp_tol;
    std::complex<double> m = m0;
    int evals = 0;
    double res = kHuge;

    // Damped iterations first; Aitken (Steffensen) cycles afterwards.
    for (int it = 0; it < 50 && evals < opts_.max_iterations; ++it, ++evals) {
        const std::complex<double> fm = F(m);
        res = std::abs(fm - m);
        if (res < tol * std::max(1.0, std::abs(m))) return fm;
        m = 0.5 * m + 0.5 * fm;
    }
    while (evals < opts_.max_iterations) {
        const std::complex<double> f1 = F(m);
        ++evals;
        res = std::abs(f1 - m);
        if (res < tol * std::max(1.0, std::abs(m))) return f1;
        const std::complex<double> g1 = 0.5 * m + 0.5 * f1;
        const std::complex<double> f2 = F(g1);
        ++evals;
        const std::complex<double> g2 = 0.5 * g1 + 0.5 * f2;
        const std::complex<double> denom = g2 - 2.0 * g1 + m;
        std::complex<double> next = g2;
        if (std::abs(denom) > 1e-300) {
            const std::complex<double> acc = m - (g1 - m) * (g1 - m) / denom;
            if (std::isfinite(acc.real()) && std::isfinite(acc.imag())) next = acc;
        }
        m = next;
    }
    throw SolverError("stieltjes_mp: fixed point did not converge at z=(" +
                          std::to_string(z.real()) + "," + std::to_string(z.imag()) + ")",
                      res);
}

StieltjesPoint DeformedMPLaw::stieltjes(std::complex<double> z) const {
    if (z.imag() == 0.0) return stieltjes_real(z.real());
    if (z.imag() < 0.0) {
        StieltjesPoint p = stieltjes(std::conj(z));
        return {z, std::conj(p.m), std::conj(p.m_tilde), p.residual};
    }

    const std::complex<double> mt = solve_fixed_point(z, -1.0 / z);
    if (!(mt.imag() > -1e-10))
        throw SolverError("stieltjes_mp: companion root left the upper half plane");

    StieltjesPoint p;
    p.z = z;
    p.m_tilde = mt;
    p.m = (mt + (1.0 - gamma_) / z) / gamma_;
    // residual of the first Marchenko-Pastur equation
    std::complex<double> s = 0.0;
    const std::complex<double> c = 1.0 - gamma_ - gamma_ * z * p.m;
    for (const auto& a : nu_.atoms()) s += a.weight / (a.value * c - z);
    p.residual = std::abs(s - p.m);
    return p;
}

StieltjesPoint DeformedMPLaw::stieltjes_real(double x) const {
    const double scale = std::max(1.0, std::abs(x));
    if (dist_to_spectrum(x) <= 0.0)
        throw SolverError("stieltjes_real: x inside the spectrum");

    // epsilon-continuation from x + i*1e-3 down to 1e-9.
    double eps = 1e-3 * scale;
    std::complex<double> mt_c =
        solve_fixed_point({x, eps}, -1.0 / std::complex<double>(x, eps));
    while (eps > 1e-9 * scale) {
        eps *= 0.5;
        mt_c = solve_fixed_point({x, eps}, mt_c);
    }
    double mt = mt_c.real();

    // Newton polish on the real inverse relation z(mt) = x.
    double g = z_of_m(mt) - x;
    for (int it = 0; it < 80 && std::abs(g) > 1e-13 * scale; ++it) {
        const double zp = z_prime(mt);
        if (!(std::abs(zp) > 0.0) || !std::isfinite(zp)) break;
        mt -= g / zp;
        g = z_of_m(mt) - x;
    }
    if (std::abs(g) > 1e-8 * scale)
        throw SolverError("stieltjes_real: inverse relation not satisfied", std::abs(g));
    if (!(z_prime(mt) > 0.0))
        throw SolverError("stieltjes_real: landed outside the bijection domain");

    StieltjesPoint p;
    p.z = x;
    p.m_tilde = mt;
    p.m = (mt + (1.0 - gamma_) / x) / gamma_;
    p.residual = std::abs(g);
    return p;
}

BulkLaw DeformedMPLaw::density_grid(std::span<const double> xs, double eta, int M) const {
    if (xs.empty()) throw SolverError("density_grid: empty grid");
    if (!(eta > 0.0) || eta > 1e-2)
        throw SolverError("density_grid: eta must lie in (0, 1e-2]");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] < xs[i - 1]) throw SolverError("density_grid: grid not sorted");

    // A bulk that reaches the origin has an x^{-1/2} hard edge; the fixed
    // smoothing scale eta would wash it out for x = O(eta), so eta shrinks
    // proportionally to the edge distance there.
    const double scale = support_sup();
    const bool hard_edge = !support_.empty() && support_.front().lo < 0.02 * scale;
    const double hard_lo = support_.empty() ? 0.0 : support_.front().lo;

    std::vector<double> fs(xs.size());
    std::complex<double> warm = {0.0, 1.0};
    bool have_warm = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double eta_i = eta;
        if (hard_edge) {
            const double u = xs[i] - hard_lo;
            if (u >= 0.0 && u < 100.0 * eta)
                eta_i = std::clamp(u / 30.0, 3e-9, eta);
        }
        // Solve at the base height first (keeps the warm-start sweep on the
        // physical branch), then continue down to the adapted height.
        const std::complex<double> z_base(xs[i], eta);
        const std::complex<double> start = have_warm ? warm : -1.0 / z_base;
        std::complex<double> mt_full = solve_fixed_point(z_base, start);
        warm = mt_full;
        have_warm = true;
        double cur = eta;
        while (cur > eta_i * 1.0000001) {
            cur = std::max(0.5 * cur, eta_i);
            mt_full = solve_fixed_point({xs[i], cur}, mt_full);
        }
        const std::complex<double> z_full(xs[i], eta_i);
        const std::complex<double> z_half(xs[i], 0.5 * eta_i);
        const std::complex<double> mt_half = solve_fixed_point(z_half, mt_full);
        const std::complex<double> m_full = (mt_full + (1.0 - gamma_) / z_full) / gamma_;
        const std::complex<double> m_half = (mt_half + (1.0 - gamma_) / z_half) / gamma_;
        const double f = (2.0 * m_half.imag() - m_full.imag()) / M_PI;
        fs[i] = std::max(f, 0.0);
    }

    // Segment ids follow the support interval each point belongs to.
    std::vector<int> seg(xs.size(), 0);
    int cur = 0;
    int last_interval = -2;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        int interval = -1;
        for (std::size_t k = 0; k < support_.size(); ++k)
            if (support_[k].contains(xs[i], 1e-9 * std::max(1.0, std::abs(xs[i])))) {
                interval = static_cast<int>(k);
                break;
            }
        if (i > 0 && interval != last_interval) ++cur;
        seg[i] = cur;
        last_interval = interval;
    }

    return BulkLaw(mu_zero_mass_, std::vector<double>(xs.begin(), xs.end()), std::move(fs),
                   std::move(seg), M);
}

BulkLaw DeformedMPLaw::make_bulk_law(int grid_points, double eta, int M) const {
    double total_len = 0.0;
    for (const auto& iv : support_) total_len += std::max(iv.length(), 0.0);
    if (total_len <= 0.0) {
        // Point spectrum at the origin.
        std::vector<double> xs = {0.0};
        std::vector<double> fs = {0.0};
        return BulkLaw(1.0, std::move(xs), std::move(fs), {0}, M);
    }

    const double scale = support_sup();
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(grid_points) + 8 * support_.size());
    for (const auto& iv : support_) {
        const double len = iv.length();
        if (len <= 0.0) continue;
        int n = std::max(48, static_cast<int>(std::lround(grid_points * len / total_len)));
        const bool hard = iv.lo < 0.02 * scale;
        // on an x^{-1/2} edge the sliver below the first point carries
        // 2 A sqrt(delta) of mass, so start much deeper there
        const double delta = (hard ? 1e-9 : 1e-7) * len;
        for (int j = 0; j < n; ++j) {
            const double t = static_cast<double>(j) / (n - 1);
            const double s = std::sin(0.5 * M_PI * t);
            xs.push_back(iv.lo + delta + (len - delta) * s * s);
        }
        if (hard) {
            // Geometric refinement across the hard-edge zone keeps the
            // relative trapezoid error uniformly small for power laws.
            const double zlo = delta, zhi = 0.05 * len;
            const int extra = 300;
            const double ratio = std::log(zhi / zlo) / (extra - 1);
            for (int j = 0; j < extra; ++j)
                xs.push_back(iv.lo + zlo * std::exp(ratio * j));
        }
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return density_grid(xs, eta, M);
}

}  // namespace ckspectra

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ckspectra/serialize.hpp"
#include "ckspectra/simulator.hpp"

using namespace ckspectra;
using cplx = std::complex<double>;

namespace {

DiscreteMeasure random_measure(std::mt19937& gen, int max_atoms) {
    std::uniform_int_distribution<int> count(2, max_atoms);
    std::uniform_real_distribution<double> val(0.1, 8.0), wgt(0.05, 1.0);
    std::vector<Atom> atoms;
    double total = 0.0;
    const int k = count(gen);
    for (int i = 0; i < k; ++i) {
        atoms.push_back({val(gen), wgt(gen)});
        total += atoms.back().weight;
    }
    for (auto& a : atoms) a.weight /= total;
    return DiscreteMeasure(atoms);
}

}  // namespace

TEST_CASE("measure JSON round trip is exact") {
    std::mt19937 gen(1);
    for (int rep = 0; rep < 40; ++rep) {
        const DiscreteMeasure mu = random_measure(gen, 20);
        const DiscreteMeasure back = measure_from_json(to_json(mu));
        REQUIRE(back.size() == mu.size());
        for (std::size_t i = 0; i < mu.size(); ++i) {
            CHECK(back.atoms()[i].value == mu.atoms()[i].value);
            CHECK(back.atoms()[i].weight == mu.atoms()[i].weight);
        }
    }
}

TEST_CASE("bulk law JSON round trip preserves mass and moments") {
    DeformedMPLaw law(0.5, DiscreteMeasure({{1.0, 0.6}, {3.0, 0.4}}));
    const BulkLaw bulk = law.make_bulk_law(900, 1e-5, 500);
    const BulkLaw back = bulk_from_json(to_json(bulk), 500);
    CHECK(back.zero_mass() == bulk.zero_mass());
    CHECK(back.grid_mass() == doctest::Approx(bulk.grid_mass()).epsilon(1e-9));
    CHECK(back.mean() == doctest::Approx(bulk.mean()).epsilon(1e-9));
}

TEST_CASE("affine pushforward round trips under random maps") {
    std::mt19937 gen(2);
    std::uniform_real_distribution<double> scale(0.05, 3.0), shift(0.0, 2.0);
    for (int rep = 0; rep < 60; ++rep) {
        const DiscreteMeasure mu = random_measure(gen, 15);
        const double a2 = scale(gen), b = shift(gen);
        const DiscreteMeasure back =
            affine_pushforward(affine_pushforward(mu, a2, b), 1.0 / a2, -b / a2);
        REQUIRE(back.size() == mu.size());
        for (std::size_t i = 0; i < mu.size(); ++i)
            CHECK(back.atoms()[i].value ==
                  doctest::Approx(mu.atoms()[i].value).epsilon(1e-12));
    }
}

TEST_CASE("stieltjes conjugate symmetry for random laws") {
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> re(-4.0, 10.0), im(1e-4, 2.0);
    for (int rep = 0; rep < 10; ++rep) {
        const DiscreteMeasure nu = random_measure(gen, 10);
        DeformedMPLaw law(0.3 + 0.4 * (rep % 3), nu);
        for (int k = 0; k < 10; ++k) {
            const cplx z(re(gen), im(gen));
            const StieltjesPoint p = law.stieltjes(z);
            const StieltjesPoint q = law.stieltjes(std::conj(z));
            CHECK(std::abs(q.m - std::conj(p.m)) < 1e-11);
            CHECK(p.m.imag() >= 0.0);
            CHECK(p.residual < 1e-11);
        }
    }
}

namespace {

// A representative point inside a bijection piece; half-infinite images are
// sampled near their finite end.
double piece_probe(const BijectionPiece& piece) {
    if (!(piece.m_hi > piece.m_lo)) return piece.m_lo;
    if (std::isfinite(piece.x_lo) && std::isfinite(piece.x_hi))
        return 0.5 * (piece.m_lo + piece.m_hi);
    if (std::isfinite(piece.x_lo)) return piece.m_lo + 0.25 * (piece.m_hi - piece.m_lo);
    return piece.m_hi - 0.25 * (piece.m_hi - piece.m_lo);
}

}  // namespace

TEST_CASE("bijection round trip at 1e-9 for random laws") {
    std::mt19937 gen(4);
    for (int rep = 0; rep < 10; ++rep) {
        const DiscreteMeasure nu = random_measure(gen, 12);
        const double gamma = 0.25 + 0.35 * (rep % 4);
        DeformedMPLaw law(gamma, nu);
        int checked = 0;
        for (const auto& piece : law.bijection_pieces()) {
            if (!(piece.m_hi > piece.m_lo)) continue;
            const double m = piece_probe(piece);
            if (!(law.z_prime(m) > 0.0)) continue;
            const double x = law.z_of_m(m);
            if (law.dist_to_spectrum(x) <= 1e-7 || std::abs(x) > 1e6) continue;
            const StieltjesPoint p = law.stieltjes_real(x);
            CHECK(p.m_tilde.real() == doctest::Approx(m).epsilon(1e-9));
            ++checked;
        }
        CHECK(checked >= 1);
    }
}

TEST_CASE("z' is positive on the preimage of the support complement") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        const DiscreteMeasure nu = random_measure(gen, 8);
        DeformedMPLaw law(0.6, nu);
        const double top = law.support_sup();
        for (int k = 0; k < 50; ++k) {
            const double x = top + 0.02 + 3.0 * u(gen);
            const StieltjesPoint p = law.stieltjes_real(x);
            CHECK(law.z_prime(p.m_tilde.real()) > 0.0);
        }
    }
}

TEST_CASE("phi lies in (0,1) for survived spikes under random deep configs") {
    std::mt19937 gen(6);
    std::uniform_real_distribution<double> gam(0.2, 1.6), th(0.9, 3.5);
    for (int rep = 0; rep < 8; ++rep) {
        NetworkSpec net;
        net.L = 2 + (rep % 2);
        for (int ell = 0; ell <= net.L; ++ell) net.gammas.push_back(gam(gen));
        net.activation = make_activation(rep % 2 ? "tanh" : "arctan");

        std::vector<double> thetas;
        for (int i = 0; i < 3; ++i) thetas.push_back(th(gen) + 0.01 * i);
        const GmmInit init = gmm_init(thetas, net.gammas[0]);
        if (init.spike_list().empty()) continue;

        EngineParams params;
        params.M = 600;
        params.grid_points = 500;
        DeformedMPLaw mu0_law(net.gammas[0], DiscreteMeasure::point_mass(1.0));
        DeepPrediction pred =
            propagate_bulk(net, mu0_law.make_bulk_law(500, 1e-5, 600), params);
        const auto trajs = propagate_spikes(net, pred, init.spike_list(), params);
        for (const auto& t : trajs) {
            double prev_product = 1.0;
            bool alive = true;
            for (const auto& rec : t.layers) {
                if (rec.survived) {
                    REQUIRE(alive);  // nested index sets
                    CHECK(rec.phi_val > 0.0);
                    CHECK(rec.phi_val < 1.0);
                    CHECK(rec.alignment_product < prev_product);
                    CHECK(rec.edge_distance > 0.0);
                    prev_product = rec.alignment_product;
                } else {
                    alive = false;
                }
            }
        }
    }
}

TEST_CASE("simulate twice, serial and parallel, bytes agree") {
    GdSimConfig cfg;
    cfg.n = 128;
    cfg.d = 96;
    cfg.N = 160;
    cfg.eta_schedule = {1.0};
    cfg.seed = 77;
    cfg.trials = 4;
    cfg.M = 400;
    const std::string a = to_json(run_gd_experiment(cfg)).dump();
    cfg.workers = 2;
    const std::string b = to_json(run_gd_experiment(cfg)).dump();
    CHECK(a == b);
}

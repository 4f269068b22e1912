#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ckspectra/spike_engine.hpp"

using namespace ckspectra;

namespace {

NetworkSpec make_net(int L, double gamma, const char* act) {
    NetworkSpec net;
    net.L = L;
    net.gammas.assign(L + 1, gamma);
    net.activation = make_activation(act);
    return net;
}

}  // namespace

TEST_CASE("phi closed form for a point-mass population") {
    DeformedMPLaw law(1.0 / 3.0, DiscreteMeasure::point_mass(1.0));
    // phi(-1/lambda) = (1 - gamma/(lambda-1)^2) / (1 + gamma/(lambda-1)) at lambda=5
    CHECK(phi_at(law, -0.2) == doctest::Approx(47.0 / 52.0).epsilon(1e-12));

    // gamma -> 0: phi -> 1
    DeformedMPLaw tiny(1e-8, DiscreteMeasure::point_mass(1.0));
    CHECK(phi_at(tiny, -0.2) == doctest::Approx(1.0).epsilon(1e-6));

    // at the BBP-critical point z'(s) = 0 the numerator vanishes
    const double gamma = 1.0 / 3.0;
    const double lam_crit = 1.0 + std::sqrt(gamma);
    CHECK(std::abs(phi_at(law, -1.0 / lam_crit)) < 1e-10);

    CHECK_THROWS_AS(phi_at(law, -1.0), SolverError);  // pole of z
}

TEST_CASE("bulk recursion reduces to the classical MP law for the identity activation") {
    NetworkSpec net = make_net(1, 0.25, "identity");
    const DeepPrediction pred = propagate_bulk(net, DiscreteMeasure::point_mass(1.0));
    REQUIRE(pred.layer_laws.size() == 1);
    REQUIRE(pred.layer_laws[0].support().size() == 1);
    CHECK(pred.layer_laws[0].support()[0].lo == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(pred.layer_laws[0].support()[0].hi == doctest::Approx(2.25).epsilon(1e-6));
    CHECK_NOTHROW(pred.bulk_laws[0].check_normalization(1e-3));
}

TEST_CASE("activations violating the standing assumptions are rejected") {
    NetworkSpec net = make_net(1, 0.5, "tanh");
    net.activation = normalize(
        "h2", [](double x) { return (x * x - 1.0) / std::sqrt(2.0); },
        [](double x) { return std::sqrt(2.0) * x; },
        [](double) { return std::sqrt(2.0); });
    CHECK_THROWS_AS(net.validate(), ActivationError);
}

TEST_CASE("figure-1 style three layer recursion stays normalized") {
    NetworkSpec net = make_net(2, 1.0 / 3.0, "arctan");
    DeformedMPLaw mu0_law(1.0 / 3.0, DiscreteMeasure::point_mass(1.0));
    const DeepPrediction pred = propagate_bulk(net, mu0_law.make_bulk_law());
    REQUIRE(pred.bulk_laws.size() == 2);
    for (const auto& law : pred.bulk_laws) CHECK_NOTHROW(law.check_normalization(1e-3));
}

TEST_CASE("single spike through one identity layer matches the closed forms") {
    NetworkSpec net = make_net(1, 1.0 / 3.0, "identity");
    DeepPrediction pred = propagate_bulk(net, DiscreteMeasure::point_mass(1.0));
    const auto trajs = propagate_spikes(net, pred, {{1, 5.0}});
    REQUIRE(trajs.size() == 1);
    const LayerRecord& rec = trajs[0].layers[0];
    CHECK(rec.survived);
    CHECK(rec.z_val == doctest::Approx(65.0 / 12.0).epsilon(1e-9));
    CHECK(rec.phi_val == doctest::Approx(47.0 / 52.0).epsilon(1e-9));
    CHECK(rec.alignment_product == doctest::Approx(47.0 / 52.0).epsilon(1e-9));
    CHECK(rec.edge_distance > 0.0);
}

TEST_CASE("a spike at the exact BBP threshold does not survive") {
    const double gamma = 1.0 / 3.0;
    NetworkSpec net = make_net(1, gamma, "identity");
    DeepPrediction pred = propagate_bulk(net, DiscreteMeasure::point_mass(1.0));
    const double lam_crit = 1.0 + std::sqrt(gamma);
    const auto trajs = propagate_spikes(net, pred, {{1, lam_crit}});
    CHECK_FALSE(trajs[0].layers[0].survived);
    CHECK(trajs[0].layers[0].critical);
}

TEST_CASE("figure-1 GMM configuration: three spikes at the input, fewer deeper") {
    NetworkSpec net = make_net(2, 1.0 / 3.0, "arctan");
    const GmmInit init = gmm_init({2.0, 1.18, 1.0}, 1.0 / 3.0);
    // all three thetas clear the layer-0 threshold gamma0^{1/4} ~ 0.7598
    int at_input = 0;
    for (const auto& c : init.components)
        if (c.above_threshold) ++at_input;
    CHECK(at_input == 3);

    DeformedMPLaw mu0_law(1.0 / 3.0, DiscreteMeasure::point_mass(1.0));
    DeepPrediction pred = propagate_bulk(net, mu0_law.make_bulk_law());
    const auto trajs = propagate_spikes(net, pred, init.spike_list());

    std::vector<int> counts(net.L + 1, 0);
    counts[0] = at_input;
    for (const auto& t : trajs)
        for (int ell = 1; ell <= net.L; ++ell)
            if (t.survived_at(ell)) ++counts[ell];
    CHECK(counts[1] <= counts[0]);
    CHECK(counts[2] <= counts[1]);
    CHECK(counts[2] < 3);  // the depth attrition visible in the paper's panels

    // nested survival and strictly decreasing alignment products
    for (const auto& t : trajs) {
        double prev = 1.0;
        bool alive = true;
        for (const auto& rec : t.layers) {
            if (!alive) CHECK_FALSE(rec.survived);
            if (rec.survived) {
                CHECK(rec.phi_val > 0.0);
                CHECK(rec.phi_val < 1.0);
                CHECK(rec.alignment_product < prev);
                CHECK(rec.z_val > 0.0);
                CHECK(rec.edge_distance > 0.0);
                prev = rec.alignment_product;
            } else {
                alive = false;
            }
        }
    }
}

TEST_CASE("gmm_init closed forms") {
    const GmmInit init = gmm_init({2.0}, 1.0 / 3.0);
    REQUIRE(init.components.size() == 1);
    CHECK(init.components[0].above_threshold);
    CHECK(init.components[0].lambda0 == doctest::Approx(65.0 / 12.0).epsilon(1e-12));
    CHECK(init.components[0].base_alignment == doctest::Approx(47.0 / 52.0).epsilon(1e-12));

    // boundary theta = gamma0^{1/4} is flagged below threshold (strict inequality)
    const double gamma0 = 0.5;
    const GmmInit boundary = gmm_init({std::pow(gamma0, 0.25)}, gamma0);
    CHECK_FALSE(boundary.components[0].above_threshold);
    CHECK(boundary.spike_list().empty());

    // noiseless limit: lambda -> 1 + theta^2, alignment -> 1
    const GmmInit clean = gmm_init({1.5}, 1e-9);
    CHECK(clean.components[0].lambda0 == doctest::Approx(1.0 + 2.25).epsilon(1e-8));
    CHECK(clean.components[0].base_alignment == doctest::Approx(1.0).epsilon(1e-8));

    CHECK_THROWS_AS(gmm_init({1.0, 1.0}, 0.5), SolverError);
}

TEST_CASE("gmm base alignment equals phi of the equivalent sample covariance problem") {
    // The rank-one signal-plus-noise Gram is the spiked sample covariance with
    // population spike 1 + theta^2 over nu = delta_1 at ratio gamma0.
    for (double theta : {1.2, 2.0, 3.5}) {
        for (double gamma0 : {0.2, 1.0 / 3.0, 0.9}) {
            const GmmInit init = gmm_init({theta}, gamma0);
            REQUIRE(init.components[0].above_threshold);
            DeformedMPLaw law(gamma0, DiscreteMeasure::point_mass(1.0));
            const double s = -1.0 / (1.0 + theta * theta);
            CHECK(init.components[0].lambda0 ==
                  doctest::Approx(law.z_of_m(s)).epsilon(1e-9));
            CHECK(init.components[0].base_alignment ==
                  doctest::Approx(phi_at(law, s)).epsilon(1e-9));
        }
    }
}

TEST_CASE("full engine at L=1 with the identity activation matches the linear model") {
    // With identity sigma and mu0 = delta_1 the layer map is exactly the
    // nu = delta_1 deformed MP, so every prediction has a closed form.
    const double gamma = 1.0 / 3.0;
    NetworkSpec net = make_net(1, gamma, "identity");
    DeepPrediction pred = propagate_bulk(net, DiscreteMeasure::point_mass(1.0));
    for (double lambda : {3.0, 5.0, 10.0}) {
        DeepPrediction local = pred;
        const auto trajs = propagate_spikes(net, local, {{1, lambda}});
        const double z_cf = lambda + gamma * lambda / (lambda - 1.0);
        const double phi_cf = (1.0 - gamma / ((lambda - 1.0) * (lambda - 1.0))) /
                              (1.0 + gamma / (lambda - 1.0));
        CHECK(trajs[0].layers[0].z_val == doctest::Approx(z_cf).epsilon(1e-6));
        CHECK(trajs[0].layers[0].phi_val == doctest::Approx(phi_cf).epsilon(1e-6));
    }
}

TEST_CASE("invalid spike lists are rejected") {
    NetworkSpec net = make_net(1, 0.5, "identity");
    DeepPrediction pred = propagate_bulk(net, DiscreteMeasure::point_mass(1.0));
    CHECK_THROWS_AS(propagate_spikes(net, pred, {{1, -2.0}}), SolverError);
    CHECK_THROWS_AS(propagate_spikes(net, pred, {{1, 5.0}, {2, 5.0}}), SolverError);
    // a spike colliding with a population atom maps onto a pole of z
    CHECK_THROWS_WITH_AS(propagate_spikes(net, pred, {{1, 1.0}}),
                         doctest::Contains("merged with bulk atom"), SolverError);
}

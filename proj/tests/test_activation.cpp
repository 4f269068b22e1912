#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ckspectra/activation.hpp"

using namespace ckspectra;

namespace {

// Independent quadrature oracle: composite trapezoid of f(x) phi(x) over
// [-12, 12] with a dense grid. Deliberately not Gauss-Hermite.
double trapezoid_expect(const std::function<double(double)>& f, int pts = 400001) {
    const double lo = -12.0, hi = 12.0;
    const double h = (hi - lo) / (pts - 1);
    double s = 0.0;
    for (int i = 0; i < pts; ++i) {
        const double x = lo + i * h;
        const double w = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
        s += w * f(x) * std::exp(-0.5 * x * x);
    }
    return s * h / std::sqrt(2.0 * M_PI);
}

}  // namespace

TEST_CASE("gauss-hermite expectation on polynomials") {
    CHECK(gauss_hermite_expect([](double) { return 1.0; }, 8) ==
          doctest::Approx(1.0).epsilon(1e-14));
    CHECK(gauss_hermite_expect([](double x) { return x * x; }, 8) ==
          doctest::Approx(1.0).epsilon(1e-13));
    CHECK(gauss_hermite_expect([](double x) { return x * x * x * x; }, 8) ==
          doctest::Approx(3.0).epsilon(1e-13));
    CHECK_THROWS_AS(gauss_hermite_expect([](double) { return 1.0; }, 1), ActivationError);
    CHECK_THROWS_AS(
        gauss_hermite_expect([](double x) { return 1.0 / (x - x); }, 8), ActivationError);
}

TEST_CASE("identity activation is already normalized") {
    const NormalizedActivation id = make_activation("identity");
    CHECK(std::abs(id.c0) < 1e-12);
    CHECK(id.c1 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(id.b_sigma == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(id.zeta2) < 1e-12);
}

TEST_CASE("tanh normalization against an independent oracle") {
    const NormalizedActivation act = make_activation("tanh");
    CHECK(std::abs(act.c0) < 1e-13);    // odd function
    CHECK(std::abs(act.zeta2) < 1e-13); // odd function
    const double var = trapezoid_expect([](double x) { return std::tanh(x) * std::tanh(x); });
    CHECK(act.c1 == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
    const double bs = trapezoid_expect([](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }) / std::sqrt(var);
    CHECK(act.b_sigma == doctest::Approx(bs).epsilon(1e-9));
}

TEST_CASE("arctan normalization") {
    const NormalizedActivation act = make_activation("arctan");
    CHECK(std::abs(act.c0) < 1e-13);
    CHECK(std::abs(act.zeta2) < 1e-13);
    const double var = trapezoid_expect([](double x) { return std::atan(x) * std::atan(x); });
    CHECK(act.c1 == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
}

TEST_CASE("b_sigma agrees with Stein's identity E[xi sigma(xi)]") {
    for (const char* name : {"tanh", "arctan", "erf", "identity", "softplus"}) {
        const NormalizedActivation act = make_activation(name, 200);
        const double stein =
            gauss_hermite_expect([&](double x) { return x * act.eval(x); }, 200);
        CHECK_MESSAGE(act.b_sigma == doctest::Approx(stein).epsilon(1e-9), name);
    }
}

TEST_CASE("zeta2 agrees with E[sigma'']/sqrt(2)") {
    for (const char* name : {"tanh", "erf", "softplus"}) {
        const NormalizedActivation act = make_activation(name);
        CHECK_MESSAGE(act.zeta2 ==
                          doctest::Approx(act.second_deriv_mean / std::sqrt(2.0))
                              .epsilon(1e-9)
                              .scale(1.0),
                      name);
    }
}

TEST_CASE("doubling the quadrature order does not move the constants") {
    for (const char* name : {"tanh", "erf", "arctan"}) {
        const NormalizedActivation a = make_activation(name, 200);
        const NormalizedActivation b = make_activation(name, 400);
        CHECK(std::abs(a.c1 - b.c1) < 1e-10);
        CHECK(std::abs(a.b_sigma - b.b_sigma) < 1e-10);
    }
}

TEST_CASE("validate_assumption") {
    CHECK(validate_assumption(make_activation("identity")).empty());
    CHECK(validate_assumption(make_activation("tanh")).empty());

    // pure second Hermite mode: b_sigma = 0 and E[sigma''] != 0
    const NormalizedActivation h2 = normalize(
        "h2", [](double x) { return (x * x - 1.0) / std::sqrt(2.0); },
        [](double x) { return 2.0 * x / std::sqrt(2.0); },
        [](double) { return 2.0 / std::sqrt(2.0); });
    const auto violations = validate_assumption(h2);
    REQUIRE(violations.size() == 2);

    // softplus is centered/scaled but keeps E[sigma''] != 0
    const auto sp = validate_assumption(make_activation("softplus"));
    CHECK(sp.size() == 1);
}

TEST_CASE("degenerate and unknown activations are rejected") {
    CHECK_THROWS_AS(normalize(
                        "const", [](double) { return 3.0; }, [](double) { return 0.0; },
                        [](double) { return 0.0; }),
                    ActivationError);
    CHECK_THROWS_WITH_AS(make_activation("relu"), doctest::Contains("catalog"),
                         ActivationError);
}

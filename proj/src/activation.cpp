#include "ckspectra/activation.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace ckspectra {

GaussHermite::GaussHermite(int order) {
    if (order < 2)
        throw ActivationError("GaussHermite: order must be at least 2");

    // Golub-Welsch on the physicists' Hermite Jacobi matrix
    // (off-diagonal beta_k = sqrt(k/2)), then rescale nodes by sqrt(2) and
    // weights by 1/sqrt(pi) for the N(0,1) weight.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double beta = std::sqrt(0.5 * k);
        jacobi(k, k - 1) = beta;
        jacobi(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    if (es.info() != Eigen::Success)
        throw ActivationError("GaussHermite: eigensolver failed");

    nodes_.resize(order);
    weights_.resize(order);
    const double sqrt2 = std::sqrt(2.0);
    for (int i = 0; i < order; ++i) {
        nodes_[i] = sqrt2 * es.eigenvalues()(i);
        const double q0 = es.eigenvectors()(0, i);
        weights_[i] = q0 * q0;  // physicists' weight / sqrt(pi)
    }
}

double GaussHermite::expect(const std::function<double(double)>& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const double v = f(nodes_[i]);
        if (!std::isfinite(v))
            throw ActivationError("gauss_hermite_expect: non-finite value at node " +
                                  std::to_string(nodes_[i]));
        s += weights_[i] * v;
    }
    return s;
}

double gauss_hermite_expect(const std::function<double(double)>& f, int order) {
    return GaussHermite(order).expect(f);
}

NormalizedActivation normalize(std::string name, ScalarFn raw, ScalarFn raw_d1,
                               ScalarFn raw_d2, int order) {
    GaussHermite gh(order);

    NormalizedActivation act;
    act.name = std::move(name);
    act.raw = std::move(raw);
    act.raw_d1 = std::move(raw_d1);
    act.raw_d2 = std::move(raw_d2);
    act.quadrature_order = order;

    act.c0 = gh.expect(act.raw);
    const double m2 = gh.expect([&](double x) {
        const double v = act.raw(x) - act.c0;
        return v * v;
    });
    if (m2 <= 1e-12)
        throw ActivationError("normalize: degenerate activation (zero variance)");
    act.c1 = std::sqrt(m2);

    act.b_sigma = gh.expect(act.raw_d1) / act.c1;
    act.second_deriv_mean = gh.expect(act.raw_d2) / act.c1;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    act.zeta2 = gh.expect([&](double x) {
        return act.eval(x) * (x * x - 1.0) * inv_sqrt2;
    });

    double sup = 0.0;
    for (double x : gh.nodes()) {
        sup = std::max(sup, std::abs(act.deriv(x)));
        sup = std::max(sup, std::abs(act.second(x)));
    }
    act.lambda_bound = sup;
    return act;
}

std::vector<std::string> validate_assumption(const NormalizedActivation& act, double tol) {
    std::vector<std::string> violations;
    if (std::abs(act.b_sigma) <= tol)
        violations.push_back("b_sigma = " + std::to_string(act.b_sigma) +
                             " (degenerate linear component)");
    if (std::abs(act.second_deriv_mean) >= tol)
        violations.push_back("E[sigma''] = " + std::to_string(act.second_deriv_mean) +
                             " (nonzero; uninformative spikes possible)");
    return violations;
}

namespace {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

const std::vector<std::string>& activation_catalog() {
    static const std::vector<std::string> names = {"tanh", "arctan", "erf", "identity",
                                                   "softplus"};
    return names;
}

NormalizedActivation make_activation(const std::string& name, int order) {
    if (name == "tanh") {
        return normalize(
            name, [](double x) { return std::tanh(x); },
            [](double x) { const double t = std::tanh(x); return 1.0 - t * t; },
            [](double x) {
                const double t = std::tanh(x);
                return -2.0 * t * (1.0 - t * t);
            },
            order);
    }
    if (name == "arctan") {
        return normalize(
            name, [](double x) { return std::atan(x); },
            [](double x) { return 1.0 / (1.0 + x * x); },
            [](double x) {
                const double d = 1.0 + x * x;
                return -2.0 * x / (d * d);
            },
            order);
    }
    if (name == "erf") {
        const double c = 2.0 / std::sqrt(M_PI);
        return normalize(
            name, [](double x) { return std::erf(x); },
            [c](double x) { return c * std::exp(-x * x); },
            [c](double x) { return -2.0 * x * c * std::exp(-x * x); },
            order);
    }
    if (name == "identity") {
        return normalize(
            name, [](double x) { return x; }, [](double) { return 1.0; },
            [](double) { return 0.0; }, order);
    }
    if (name == "softplus") {
        return normalize(
            name, softplus, sigmoid,
            [](double x) {
                const double s = sigmoid(x);
                return s * (1.0 - s);
            },
            order);
    }
    std::string known;
    for (const auto& n : activation_catalog()) known += (known.empty() ? "" : ", ") + n;
    throw ActivationError("unknown activation '" + name + "' (catalog: " + known + ")");
}

}  // namespace ckspectra

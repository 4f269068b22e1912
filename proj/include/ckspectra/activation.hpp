#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckspectra {

class ActivationError : public std::runtime_error {
public:
    explicit ActivationError(const std::string& what) : std::runtime_error(what) {}
};

/// Gauss-Hermite rule rescaled for expectations under N(0,1):
/// E[f(xi)] ~= sum_i weight[i] * f(node[i]).
class GaussHermite {
public:
    explicit GaussHermite(int order);

    int order() const { return static_cast<int>(nodes_.size()); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    double expect(const std::function<double(double)>& f) const;

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// E[f(xi)], xi ~ N(0,1), at the given quadrature order.
double gauss_hermite_expect(const std::function<double(double)>& f, int order);

using ScalarFn = std::function<double(double)>;

/// Activation brought to E[sigma(xi)] = 0, E[sigma(xi)^2] = 1 via
/// sigma(x) = (raw(x) - c0) / c1, with the Gaussian constants the spike
/// formulas need.
struct NormalizedActivation {
    std::string name;
    ScalarFn raw;
    ScalarFn raw_d1;
    ScalarFn raw_d2;
    double c0 = 0.0;
    double c1 = 1.0;
    double b_sigma = 0.0;       // E[sigma'(xi)]
    double zeta2 = 0.0;         // E[sigma(xi) h2(xi)], h2(x) = (x^2-1)/sqrt(2)
    double second_deriv_mean = 0.0;  // E[sigma''(xi)]
    double lambda_bound = 0.0;  // sup over the quadrature range of |sigma'|, |sigma''|
    int quadrature_order = 0;

    double eval(double x) const { return (raw(x) - c0) / c1; }
    double deriv(double x) const { return raw_d1(x) / c1; }
    double second(double x) const { return raw_d2(x) / c1; }
};

/// Computes c0, c1 and the Gaussian coefficients for a raw activation with
/// analytically supplied derivatives.
NormalizedActivation normalize(std::string name, ScalarFn raw, ScalarFn raw_d1,
                               ScalarFn raw_d2, int order = 200);

/// Empty list iff |b_sigma| > tol and |E[sigma'']| < tol.
std::vector<std::string> validate_assumption(const NormalizedActivation& act,
                                             double tol = 1e-6);

/// Catalog lookup: "tanh" | "arctan" | "erf" | "identity" | "softplus".
NormalizedActivation make_activation(const std::string& name, int order = 200);

const std::vector<std::string>& activation_catalog();

}  // namespace ckspectra

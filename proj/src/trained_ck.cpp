#include "ckspectra/trained_ck.hpp"

#include <cmath>
#include <optional>

namespace ckspectra {

void TrainedCkSpec::validate() const {
    if (!(gamma0 > 0.0) || !(gamma1 > 0.0))
        throw SolverError("TrainedCkSpec: aspect ratios must be positive");
    if (eta_total < 0.0) throw SolverError("TrainedCkSpec: eta_total must be nonnegative");
    if (sigma_eps < 0.0) throw SolverError("TrainedCkSpec: sigma_eps must be nonnegative");
    if (M < 16) throw SolverError("TrainedCkSpec: discretization order too small");
}

ThetaParams theta_params(const TrainedCkSpec& spec) {
    spec.validate();
    const double b = spec.act.b_sigma;
    const double bs = spec.label_act.b_sigma;
    ThetaParams t;
    t.theta1 = b * spec.eta_total *
               std::sqrt((spec.gamma1 / spec.gamma0) * (1.0 + spec.sigma_eps * spec.sigma_eps) +
                         bs * bs);
    t.theta1 = std::abs(t.theta1);
    t.theta2 = b * bs * spec.eta_total;
    if (spec.eta_total > 0.0) {
        const double t2 = t.theta1 * t.theta1;
        t.lambda1 = b * b * (1.0 + t2) * (spec.gamma0 + t2) / t2 + 1.0 - b * b;
        t.lambda1_defined = true;
    }
    return t;
}

bool TrainedCkModel::matches(const TrainedCkSpec& spec) const {
    return spec.gamma0 == gamma0 && spec.gamma1 == gamma1 &&
           spec.act.b_sigma == b_sigma && spec.M == M;
}

TrainedCkModel build_trained_ck_model(const TrainedCkSpec& spec) {
    spec.validate();
    const double b2 = spec.act.b_sigma * spec.act.b_sigma;
    DeformedMPLaw mp0(spec.gamma0, DiscreteMeasure::point_mass(1.0));
    const BulkLaw mp0_law = mp0.make_bulk_law(1200, 1e-5, spec.M);
    DiscreteMeasure nu0 = affine_pushforward(mp0_law.discretization(), b2, 1.0 - b2);
    return TrainedCkModel{spec.gamma0, spec.gamma1, spec.act.b_sigma, spec.M,
                          DeformedMPLaw(spec.gamma1, std::move(nu0))};
}

TrainedCkPrediction predict_trained_ck(const TrainedCkSpec& spec,
                                       const TrainedCkModel* model) {
    spec.validate();
    TrainedCkPrediction out;
    for (const auto& v : validate_assumption(spec.act))
        out.assumption_flags.push_back("sigma: " + v);
    for (const auto& v : validate_assumption(spec.label_act))
        out.assumption_flags.push_back("sigma_*: " + v);

    const ThetaParams t = theta_params(spec);
    out.theta1 = t.theta1;
    out.theta2 = t.theta2;
    out.lambda1 = t.lambda1;
    out.above_threshold = t.theta1 > std::pow(spec.gamma0, 0.25);

    // Population law of the trained-weight Gram: nu0 = b^2 (x) MP(gamma0) (+) (1-b^2).
    std::optional<TrainedCkModel> local;
    if (!model || !model->matches(spec)) {
        local.emplace(build_trained_ck_model(spec));
        model = &*local;
    }
    const DeformedMPLaw& law = model->law;

    out.bulk_edge = law.support_sup() / spec.gamma1;
    out.k_support.reserve(law.support().size());
    for (const auto& iv : law.support())
        out.k_support.push_back({iv.lo / spec.gamma1, iv.hi / spec.gamma1});

    if (!t.lambda1_defined || !out.above_threshold) {
        out.spike_exists = false;
        out.label_alignment = 0.0;
        return out;
    }

    const double s = -1.0 / t.lambda1;
    out.z_val = law.z_of_m(s);
    out.z_prime_val = law.z_prime(s);
    out.spike_exists = out.z_prime_val > 1e-8;
    if (!out.spike_exists) {
        out.label_alignment = 0.0;
        return out;
    }

    out.phi_val = -s * out.z_prime_val / out.z_val;
    out.lambda_max = out.z_val / spec.gamma1;
    out.edge_distance = out.lambda_max - out.bulk_edge;

    const double g0 = spec.gamma0;
    const double th1 = t.theta1, th2 = t.theta2;
    const double gain = std::abs(th2) *
                        std::sqrt(std::max(0.0, (th1 * th1 * th1 * th1 - g0)) *
                                  (g0 + th1 * th1)) /
                        (th1 * th1 * th1);
    out.label_alignment = std::abs(spec.act.b_sigma * spec.label_act.b_sigma) *
                          std::sqrt(std::max(0.0, out.z_val * out.phi_val)) / t.lambda1 * gain;
    return out;
}

}  // namespace ckspectra

#pragma once

#include <string>
#include <vector>

#include "ckspectra/activation.hpp"
#include "ckspectra/mp_solver.hpp"

namespace ckspectra {

/// Two-layer network trained by a few full-batch GD steps on the first
/// layer: gamma0 = N/d, gamma1 = N/n, eta_total the summed learning rate.
struct TrainedCkSpec {
    double gamma0 = 1.0;
    double gamma1 = 1.0;
    double eta_total = 0.0;
    double sigma_eps = 0.0;
    NormalizedActivation act;        // network sigma
    NormalizedActivation label_act;  // target sigma_*
    int M = 2000;

    void validate() const;
};

struct ThetaParams {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double lambda1 = 0.0;
    bool lambda1_defined = false;  // false when eta = 0
};

/// theta1 = b_sigma eta sqrt((gamma1/gamma0)(1+sigma_eps^2) + b_*^2),
/// theta2 = b_sigma b_* eta, and the induced population spike lambda1.
ThetaParams theta_params(const TrainedCkSpec& spec);

struct TrainedCkPrediction {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double lambda1 = 0.0;
    bool above_threshold = false;  // theta1 > gamma0^{1/4}
    bool spike_exists = false;     // above_threshold and z'(-1/lambda1) > 0
    double z_val = 0.0;
    double z_prime_val = 0.0;
    double phi_val = 0.0;
    double lambda_max = 0.0;        // gamma1^{-1} z(-1/lambda1)
    double label_alignment = 0.0;   // limit of |y~^T u|/sqrt(n)
    double edge_distance = 0.0;     // dist of lambda_max to the bulk edge of K
    double bulk_edge = 0.0;         // top support edge in the K frame
    std::vector<Interval> k_support;  // bulk support of K (companion frame / gamma1)
    std::vector<std::string> assumption_flags;
};

/// The laws behind a trained-CK prediction depend only on the aspect ratios
/// and b_sigma, not on eta; sweeps over learning rates reuse one model.
struct TrainedCkModel {
    double gamma0 = 0.0, gamma1 = 0.0, b_sigma = 0.0;
    int M = 0;
    DeformedMPLaw law;  // (gamma1, nu0) with nu0 = b^2 (x) MP(gamma0) (+) (1-b^2)

    bool matches(const TrainedCkSpec& spec) const;
};

TrainedCkModel build_trained_ck_model(const TrainedCkSpec& spec);

/// Theorem-level prediction of the test-data CK spike after GD:
/// nu0 = b^2 (x) MP(gamma0) (+) (1-b^2), z and phi at s = -1/lambda1 with
/// ratio gamma1. A prebuilt model is reused when it matches the spec.
TrainedCkPrediction predict_trained_ck(const TrainedCkSpec& spec,
                                       const TrainedCkModel* model = nullptr);

}  // namespace ckspectra

#pragma once

#include <optional>
#include <vector>

#include "ckspectra/activation.hpp"
#include "ckspectra/measure.hpp"
#include "ckspectra/mp_solver.hpp"

namespace ckspectra {

/// Deep random network in the proportional regime: L hidden layers with
/// aspect ratios gamma_0..gamma_L (n / d_ell) and a shared activation.
struct NetworkSpec {
    int L = 1;
    std::vector<double> gammas;  // gamma_0 .. gamma_L
    NormalizedActivation activation;

    void validate() const;
};

struct LayerRecord {
    int ell = 0;
    double s_prev = 0.0;
    double z_val = 0.0;
    double z_prime_val = 0.0;
    double phi_val = 0.0;
    bool survived = false;
    bool critical = false;  // |z'| within the survival tolerance
    double s_next = 0.0;
    double alignment_product = 0.0;  // prod of phi over layers 1..ell
    double edge_distance = 0.0;      // dist(z_val, supp(mu_ell))
};

struct SpikeTrajectory {
    int index = 0;
    double lambda0 = 0.0;
    std::vector<LayerRecord> layers;

    /// True if the spike is still an outlier at layer ell (1-based).
    bool survived_at(int ell) const {
        return ell <= static_cast<int>(layers.size()) && layers[ell - 1].survived;
    }
    int deepest_survival() const {
        int d = 0;
        for (const auto& r : layers)
            if (r.survived)
                d = r.ell;
            else
                break;
        return d;
    }
};

struct DeepPrediction {
    std::vector<double> gammas;
    double b_sigma2 = 1.0;
    BulkLaw mu0;                              // input bulk law
    std::vector<DiscreteMeasure> nu_laws;     // nu_0 .. nu_{L-1}
    std::vector<DeformedMPLaw> layer_laws;    // law of layer ell has nu_{ell-1}
    std::vector<BulkLaw> bulk_laws;           // mu_1 .. mu_L
    std::vector<SpikeTrajectory> trajectories;

    const DeformedMPLaw& law_at(int ell) const { return layer_laws[ell - 1]; }
    const BulkLaw& mu_at(int ell) const { return ell == 0 ? mu0 : bulk_laws[ell - 1]; }
};

struct EngineParams {
    int M = 2000;          // quantile atoms per layer
    int grid_points = 1200;
    double eta = 1e-5;
    double survival_tol = 1e-8;  // z' must exceed this strictly
};

/// Runs the bulk recursion nu_{ell-1} = b^2 (x) mu_{ell-1} (+) (1-b^2),
/// mu_ell = rho^MP_{gamma_ell} boxtimes nu_{ell-1}, caching every law.
DeepPrediction propagate_bulk(const NetworkSpec& net, const BulkLaw& mu0,
                              const EngineParams& params = {});
DeepPrediction propagate_bulk(const NetworkSpec& net, const DiscreteMeasure& mu0,
                              const EngineParams& params = {});

/// phi(s) = -s z'(s) / z(s).
double phi_at(const DeformedMPLaw& law, double s);

/// Spike recursion of the phase-transition index sets: s_{i,0} from the input
/// spikes, survival decided by z'(s) > 0 layer by layer. Trajectories are
/// stored in pred and returned.
std::vector<SpikeTrajectory> propagate_spikes(const NetworkSpec& net, DeepPrediction& pred,
                                              const std::vector<std::pair<int, double>>& spikes,
                                              const EngineParams& params = {});

struct GmmComponent {
    int index = 0;
    double theta = 0.0;
    bool above_threshold = false;  // theta > gamma0^{1/4}
    double lambda0 = 0.0;          // spike of K_0 when above threshold
    double base_alignment = 0.0;   // |v_i(K_0)^T b_i|^2 limit
};

struct GmmInit {
    double gamma0 = 0.0;
    std::vector<GmmComponent> components;

    std::vector<std::pair<int, double>> spike_list() const;
};

/// Signal-plus-noise initialization: lambda_i = (1+theta^2)(gamma0+theta^2)/theta^2
/// and the layer-0 eigenvector overlap, for thetas above the BBP threshold.
GmmInit gmm_init(const std::vector<double>& thetas, double gamma0);

}  // namespace ckspectra

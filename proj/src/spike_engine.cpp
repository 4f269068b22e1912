#include "ckspectra/spike_engine.hpp"

#include <algorithm>
#include <cmath>

namespace ckspectra {

void NetworkSpec::validate() const {
    if (L < 1) throw SolverError("NetworkSpec: L must be at least 1");
    if (static_cast<int>(gammas.size()) != L + 1)
        throw SolverError("NetworkSpec: need L+1 aspect ratios");
    for (double g : gammas)
        if (!(g > 0.0) || !std::isfinite(g))
            throw SolverError("NetworkSpec: aspect ratios must be positive");
    const auto violations = validate_assumption(activation);
    if (!violations.empty()) {
        std::string msg = "NetworkSpec: activation fails the standing assumptions:";
        for (const auto& v : violations) msg += " " + v;
        throw ActivationError(msg);
    }
}

namespace {

DeepPrediction propagate_from_discretized(const NetworkSpec& net, BulkLaw mu0,
                                          DiscreteMeasure mu0_atoms,
                                          const EngineParams& params) {
    DeepPrediction pred;
    pred.gammas = net.gammas;
    const double b2 = net.activation.b_sigma * net.activation.b_sigma;
    pred.b_sigma2 = b2;
    pred.mu0 = std::move(mu0);

    DiscreteMeasure current = std::move(mu0_atoms);
    for (int ell = 1; ell <= net.L; ++ell) {
        try {
            DiscreteMeasure nu = affine_pushforward(current, b2, 1.0 - b2);
            pred.nu_laws.push_back(nu);
            pred.layer_laws.emplace_back(net.gammas[ell], std::move(nu));
            pred.bulk_laws.push_back(
                pred.layer_laws.back().make_bulk_law(params.grid_points, params.eta, params.M));
            current = pred.bulk_laws.back().discretization();
        } catch (const SolverError& e) {
            throw SolverError("layer " + std::to_string(ell) + ": " + e.what(),
                              e.last_residual);
        }
    }
    return pred;
}

}  // namespace

DeepPrediction propagate_bulk(const NetworkSpec& net, const BulkLaw& mu0,
                              const EngineParams& params) {
    net.validate();
    return propagate_from_discretized(net, mu0, mu0.discretization(), params);
}

DeepPrediction propagate_bulk(const NetworkSpec& net, const DiscreteMeasure& mu0,
                              const EngineParams& params) {
    net.validate();
    // Wrap the discrete input in a degenerate grid law for reporting.
    std::vector<double> xs, fs;
    std::vector<int> seg;
    for (const auto& a : mu0.atoms()) {
        xs.push_back(a.value);
        fs.push_back(0.0);
        seg.push_back(static_cast<int>(xs.size()) - 1);
    }
    BulkLaw wrapped(0.0, std::move(xs), std::move(fs), std::move(seg), 16);
    DeepPrediction pred = propagate_from_discretized(net, std::move(wrapped), mu0, params);
    return pred;
}

double phi_at(const DeformedMPLaw& law, double s) {
    for (double p : law.poles())
        if (std::abs(s - p) <= 1e-12 * std::max(1.0, std::abs(p)))
            throw SolverError("phi_at: s collides with a pole of z");
    const double z = law.z_of_m(s);
    if (z == 0.0) throw SolverError("phi_at: z(s) = 0");
    return -s * law.z_prime(s) / z;
}

std::vector<SpikeTrajectory> propagate_spikes(const NetworkSpec& net, DeepPrediction& pred,
                                              const std::vector<std::pair<int, double>>& spikes,
                                              const EngineParams& params) {
    const double b2 = pred.b_sigma2;
    std::vector<SpikeTrajectory> out;
    out.reserve(spikes.size());

    for (std::size_t i = 0; i < spikes.size(); ++i)
        for (std::size_t j = i + 1; j < spikes.size(); ++j)
            if (spikes[i].second == spikes[j].second)
                throw SolverError("propagate_spikes: input spikes must be distinct");

    for (const auto& [index, lambda0] : spikes) {
        if (!(lambda0 > 0.0))
            throw SolverError("propagate_spikes: input spikes must be positive");
        SpikeTrajectory traj;
        traj.index = index;
        traj.lambda0 = lambda0;

        double s = -1.0 / (b2 * lambda0 + (1.0 - b2));
        bool alive = true;
        double align = 1.0;
        for (int ell = 1; ell <= net.L && alive; ++ell) {
            const DeformedMPLaw& law = pred.law_at(ell);
            for (double p : law.poles())
                if (std::abs(s - p) <= 1e-12 * std::max(1.0, std::abs(p)))
                    throw SolverError("propagate_spikes: spike merged with bulk atom at layer " +
                                      std::to_string(ell));

            LayerRecord rec;
            rec.ell = ell;
            rec.s_prev = s;
            rec.z_val = law.z_of_m(s);
            rec.z_prime_val = law.z_prime(s);
            rec.critical = std::abs(rec.z_prime_val) <= params.survival_tol;
            rec.survived = rec.z_prime_val > params.survival_tol;
            if (rec.survived) {
                rec.phi_val = -s * rec.z_prime_val / rec.z_val;
                align *= rec.phi_val;
                rec.alignment_product = align;
                rec.edge_distance = law.dist_to_support(rec.z_val);
                s = -1.0 / (b2 * rec.z_val + (1.0 - b2));
                rec.s_next = s;
            } else {
                rec.phi_val = 0.0;
                rec.alignment_product = 0.0;
                alive = false;
            }
            traj.layers.push_back(rec);
        }
        out.push_back(std::move(traj));
    }

    pred.trajectories = out;
    return out;
}

std::vector<std::pair<int, double>> GmmInit::spike_list() const {
    std::vector<std::pair<int, double>> spikes;
    for (const auto& c : components)
        if (c.above_threshold) spikes.push_back({c.index, c.lambda0});
    return spikes;
}

GmmInit gmm_init(const std::vector<double>& thetas, double gamma0) {
    if (!(gamma0 > 0.0)) throw SolverError("gmm_init: gamma0 must be positive");
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        if (!(thetas[i] > 0.0)) throw SolverError("gmm_init: thetas must be positive");
        for (std::size_t j = i + 1; j < thetas.size(); ++j)
            if (thetas[i] == thetas[j])
                throw SolverError("gmm_init: signal strengths must be distinct");
    }

    GmmInit init;
    init.gamma0 = gamma0;
    const double threshold = std::pow(gamma0, 0.25);
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        GmmComponent c;
        c.index = static_cast<int>(i) + 1;
        c.theta = thetas[i];
        c.above_threshold = thetas[i] > threshold;
        if (c.above_threshold) {
            const double t2 = thetas[i] * thetas[i];
            c.lambda0 = (1.0 + t2) * (gamma0 + t2) / t2;
            c.base_alignment = 1.0 - gamma0 * (1.0 + t2) / (t2 * (t2 + gamma0));
        }
        init.components.push_back(c);
    }
    return init;
}

}  // namespace ckspectra

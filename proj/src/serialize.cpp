#include "ckspectra/serialize.hpp"

#include <cmath>
#include <sstream>

namespace ckspectra {

json to_json(const DiscreteMeasure& mu) {
    json atoms = json::array();
    for (const auto& a : mu.atoms()) atoms.push_back({a.value, a.weight});
    return json{{"atoms", atoms}};
}

DiscreteMeasure measure_from_json(const json& j) {
    std::vector<Atom> atoms;
    for (const auto& a : j.at("atoms")) atoms.push_back({a.at(0), a.at(1)});
    return DiscreteMeasure(std::move(atoms));
}

json to_json(const BulkLaw& law) {
    json grid = json::array();
    for (std::size_t i = 0; i < law.xs().size(); ++i)
        grid.push_back({law.xs()[i], law.fs()[i]});
    return json{{"zero_mass", law.zero_mass()}, {"grid", grid}};
}

BulkLaw bulk_from_json(const json& j, int discretization_order) {
    std::vector<double> xs, fs;
    for (const auto& p : j.at("grid")) {
        xs.push_back(p.at(0));
        fs.push_back(p.at(1));
    }
    // Reconstruct segments from grid discontinuities: a step much larger
    // than the local spacing starts a new support interval.
    std::vector<int> seg(xs.size(), 0);
    double med = 0.0;
    if (xs.size() > 1) {
        std::vector<double> steps;
        for (std::size_t i = 1; i < xs.size(); ++i) steps.push_back(xs[i] - xs[i - 1]);
        std::nth_element(steps.begin(), steps.begin() + steps.size() / 2, steps.end());
        med = steps[steps.size() / 2];
    }
    int cur = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (med > 0.0 && xs[i] - xs[i - 1] > 50.0 * med) ++cur;
        seg[i] = cur;
    }
    return BulkLaw(j.at("zero_mass"), std::move(xs), std::move(fs), std::move(seg),
                   discretization_order);
}

json to_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

json to_json(const NormalizedActivation& act) {
    return json{{"name", act.name},   {"c0", act.c0},
                {"c1", act.c1},       {"b_sigma", act.b_sigma},
                {"zeta2", act.zeta2}, {"lambda_bound", act.lambda_bound}};
}

json to_json(const SpikeTrajectory& traj) {
    json layers = json::array();
    for (const auto& r : traj.layers) {
        layers.push_back(json{{"ell", r.ell},
                              {"s_prev", r.s_prev},
                              {"z", r.z_val},
                              {"z_prime", r.z_prime_val},
                              {"phi", r.phi_val},
                              {"survived", r.survived},
                              {"critical", r.critical},
                              {"s_next", r.s_next},
                              {"alignment_product", r.alignment_product},
                              {"edge_distance", r.edge_distance}});
    }
    return json{{"index", traj.index}, {"lambda0", traj.lambda0}, {"layers", layers}};
}

json to_json(const DeepPrediction& pred) {
    json layers = json::array();
    for (std::size_t ell = 1; ell <= pred.layer_laws.size(); ++ell) {
        const auto& law = pred.layer_laws[ell - 1];
        json support = json::array();
        for (const auto& iv : law.support()) support.push_back(to_json(iv));
        layers.push_back(json{{"ell", ell},
                              {"gamma", law.gamma()},
                              {"support", support},
                              {"zero_mass", law.mu_zero_mass()}});
    }
    json trajs = json::array();
    for (const auto& t : pred.trajectories) trajs.push_back(to_json(t));
    return json{{"b_sigma2", pred.b_sigma2}, {"layers", layers}, {"trajectories", trajs}};
}

json to_json(const TrainedCkPrediction& pred) {
    json support = json::array();
    for (const auto& iv : pred.k_support) support.push_back(to_json(iv));
    return json{{"theta1", pred.theta1},
                {"theta2", pred.theta2},
                {"lambda1", pred.lambda1},
                {"above_threshold", pred.above_threshold},
                {"spike_exists", pred.spike_exists},
                {"z", pred.z_val},
                {"z_prime", pred.z_prime_val},
                {"phi", pred.phi_val},
                {"lambda_max", pred.lambda_max},
                {"label_alignment", pred.label_alignment},
                {"edge_distance", pred.edge_distance},
                {"bulk_edge", pred.bulk_edge},
                {"k_support", support},
                {"assumption_flags", pred.assumption_flags}};
}

json to_json(const SimResult& res) {
    json layers = json::array();
    for (const auto& spec : res.layers) {
        json outliers = json::array();
        for (const auto& o : spec.outliers)
            outliers.push_back(json{{"value", o.value},
                                    {"alignments", o.alignments},
                                    {"matched_index", o.matched_index}});
        json hist = json{{"lo", spec.hist.lo}, {"hi", spec.hist.hi},
                         {"counts", spec.hist.counts}};
        layers.push_back(json{{"eigenvalues", spec.eigenvalues},
                              {"outliers", outliers},
                              {"histogram", hist},
                              {"max_offdiag", spec.max_offdiag},
                              {"max_norm_dev", spec.max_norm_dev}});
    }
    json j{{"trial", res.trial}, {"failed", res.failed}, {"layers", layers}};
    if (res.failed) j["error"] = res.error;
    if (std::isfinite(res.top_eigenvalue) && res.top_eigenvalue != 0.0) {
        j["top_eigenvalue"] = res.top_eigenvalue;
        j["top_alignment"] = res.top_alignment;
        j["rank_one_residual"] = res.rank_one_residual;
        j["update_norm"] = res.update_norm;
        j["mean_feature_norm"] = res.mean_feature_norm;
    }
    return j;
}

json to_json(const DeepExperimentResult& res) {
    json comps = json::array();
    for (const auto& c : res.init.components)
        comps.push_back(json{{"index", c.index},
                             {"theta", c.theta},
                             {"above_threshold", c.above_threshold},
                             {"lambda0", c.lambda0},
                             {"base_alignment", c.base_alignment}});
    json rows = json::array();
    for (const auto& r : res.agg.rows)
        rows.push_back(json{{"spike_index", r.spike_index},
                            {"ell", r.ell},
                            {"predicted_survived", r.predicted_survived},
                            {"predicted_eigenvalue", r.predicted_eigenvalue},
                            {"predicted_alignment", r.predicted_alignment},
                            {"emp_eig_mean", r.emp_eig_mean},
                            {"emp_eig_stderr", r.emp_eig_stderr},
                            {"emp_align_mean", r.emp_align_mean},
                            {"emp_align_stderr", r.emp_align_stderr},
                            {"n_obs", r.n_obs}});
    return json{{"gmm", json{{"gamma0", res.init.gamma0}, {"components", comps}}},
                {"prediction", to_json(res.prediction)},
                {"aggregate",
                 json{{"rows", rows},
                      {"pattern_match_count", res.agg.pattern_match_count},
                      {"no_outlier_count", res.agg.no_outlier_count},
                      {"trials_ok", res.agg.trials_ok}}}};
}

json to_json(const GdExperimentResult& res) {
    return json{{"prediction", to_json(res.prediction)},
                {"aggregate", json{{"top_eig_mean", res.agg.top_eig_mean},
                                   {"top_eig_stderr", res.agg.top_eig_stderr},
                                   {"align_mean", res.agg.align_mean},
                                   {"align_stderr", res.agg.align_stderr},
                                   {"residual_mean", res.agg.residual_mean},
                                   {"update_norm_mean", res.agg.update_norm_mean},
                                   {"trials_with_outlier", res.agg.trials_with_outlier},
                                   {"trials_ok", res.agg.trials_ok}}}};
}

namespace {

std::string fmt(double v) {
    std::ostringstream oss;
    oss.precision(12);
    oss << v;
    return oss.str();
}

}  // namespace

std::string csv_density(const BulkLaw& law) {
    std::string out = "x,f\n";
    for (std::size_t i = 0; i < law.xs().size(); ++i)
        out += fmt(law.xs()[i]) + "," + fmt(law.fs()[i]) + "\n";
    return out;
}

std::string csv_histogram(const Histogram& aggregated, const BulkLaw& predicted) {
    std::string out = "bin_center,count,predicted_density\n";
    for (std::size_t i = 0; i < aggregated.counts.size(); ++i) {
        const double c = aggregated.center(i);
        out += fmt(c) + "," + std::to_string(aggregated.counts[i]) + "," +
               fmt(predicted.density_at(c)) + "\n";
    }
    return out;
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace ckspectra

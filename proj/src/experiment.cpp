#include "ckspectra/experiment.hpp"

#include <filesystem>
#include <fstream>

#include "ckspectra/serialize.hpp"

namespace ckspectra {

namespace fs = std::filesystem;

Mode mode_from_string(const std::string& s) {
    if (s == "predict-deep") return Mode::PredictDeep;
    if (s == "simulate-deep") return Mode::SimulateDeep;
    if (s == "predict-trained") return Mode::PredictTrained;
    if (s == "simulate-trained") return Mode::SimulateTrained;
    if (s == "density") return Mode::Density;
    throw ConfigError("unknown mode '" + s +
                      "' (expected predict-deep | simulate-deep | predict-trained | "
                      "simulate-trained | density)");
}

std::string mode_to_string(Mode m) {
    switch (m) {
        case Mode::PredictDeep: return "predict-deep";
        case Mode::SimulateDeep: return "simulate-deep";
        case Mode::PredictTrained: return "predict-trained";
        case Mode::SimulateTrained: return "simulate-trained";
        case Mode::Density: return "density";
    }
    return "";
}

namespace {

const char* kModeKeys[] = {"predict-deep", "simulate-deep", "predict-trained",
                           "simulate-trained", "density"};

void require_activation(const std::string& name) {
    const auto& catalog = activation_catalog();
    if (std::find(catalog.begin(), catalog.end(), name) == catalog.end()) {
        std::string known;
        for (const auto& n : catalog) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown activation '" + name + "'; valid entries: " + known);
    }
}

double get_num(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    if (!j.at(key).is_number()) throw ConfigError(std::string("field '") + key + "' must be numeric");
    return j.at(key).get<double>();
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (!j.contains("mode") || !j.at("mode").is_string())
        throw ConfigError("config needs a string 'mode'");

    ExperimentConfig cfg;
    cfg.mode = mode_from_string(j.at("mode").get<std::string>());
    cfg.raw = j;

    int populated = 0;
    for (const char* key : kModeKeys)
        if (j.contains(key)) ++populated;
    if (populated != 1)
        throw ConfigError("exactly one mode block must be populated, found " +
                          std::to_string(populated));
    const std::string mode_key = mode_to_string(cfg.mode);
    if (!j.contains(mode_key))
        throw ConfigError("mode is '" + mode_key + "' but the block '" + mode_key +
                          "' is missing");
    cfg.block = j.at(mode_key);

    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    if (j.contains("workers")) {
        cfg.workers = j.at("workers").get<int>();
        if (cfg.workers < 1) throw ConfigError("workers must be positive");
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();

    // Validate the block eagerly so failures precede any artifact.
    const json& b = cfg.block;
    switch (cfg.mode) {
        case Mode::Density: {
            const double gamma = get_num(b, "gamma");
            if (!(gamma > 0.0)) throw ConfigError("density: gamma must be positive");
            if (!b.contains("nu_atoms")) throw ConfigError("density: missing 'nu_atoms'");
            break;
        }
        case Mode::PredictDeep: {
            if (!b.contains("gammas") || !b.at("gammas").is_array() ||
                b.at("gammas").size() < 2)
                throw ConfigError("predict-deep: 'gammas' must list gamma_0..gamma_L");
            for (const auto& g : b.at("gammas"))
                if (!g.is_number() || !(g.get<double>() > 0.0))
                    throw ConfigError("predict-deep: aspect ratios must be positive numbers");
            require_activation(b.value("activation", std::string("tanh")));
            const bool has_thetas = b.contains("thetas");
            const bool has_mu0 = b.contains("mu0_atoms");
            if (has_thetas == has_mu0)
                throw ConfigError(
                    "predict-deep: provide exactly one of 'thetas' (signal-plus-noise "
                    "input) or 'mu0_atoms' with 'spikes'");
            if (has_mu0 && !b.contains("spikes"))
                throw ConfigError("predict-deep: 'mu0_atoms' requires 'spikes'");
            break;
        }
        case Mode::SimulateDeep: {
            get_num(b, "n");
            if (!b.contains("dims") || !b.at("dims").is_array() || b.at("dims").size() < 2)
                throw ConfigError("simulate-deep: 'dims' must list d_0..d_L");
            require_activation(b.value("activation", std::string("tanh")));
            break;
        }
        case Mode::PredictTrained: {
            get_num(b, "gamma0");
            get_num(b, "gamma1");
            get_num(b, "eta_total");
            require_activation(b.value("activation", std::string("erf")));
            require_activation(b.value("label_activation", std::string("erf")));
            break;
        }
        case Mode::SimulateTrained: {
            get_num(b, "n");
            get_num(b, "d");
            get_num(b, "N");
            if (!b.contains("eta_schedule") || !b.at("eta_schedule").is_array())
                throw ConfigError("simulate-trained: missing 'eta_schedule'");
            require_activation(b.value("activation", std::string("erf")));
            require_activation(b.value("label_activation", std::string("erf")));
            break;
        }
    }
    return cfg;
}

namespace {

struct Artifacts {
    json report;
    std::vector<std::pair<std::string, std::string>> files;  // name -> content
};

void run_density(const ExperimentConfig& cfg, Artifacts& art) {
    const json& b = cfg.block;
    DiscreteMeasure nu = measure_from_json(json{{"atoms", b.at("nu_atoms")}});
    DeformedMPLaw law(b.at("gamma").get<double>(), std::move(nu));
    const int grid_points = b.value("grid_points", 2000);
    const double eta = b.value("eta", 1e-5);
    const int M = b.value("M", 2000);
    const BulkLaw bulk = law.make_bulk_law(grid_points, eta, M);
    bulk.check_normalization(1e-3);

    json support = json::array();
    for (const auto& iv : law.support()) support.push_back(to_json(iv));
    art.report["density"] = json{{"gamma", law.gamma()},
                                 {"support", support},
                                 {"zero_mass", law.mu_zero_mass()},
                                 {"grid_mass", bulk.grid_mass()},
                                 {"law", to_json(bulk)}};
    art.files.push_back({"density.csv", csv_density(bulk)});
}

void run_predict_deep(const ExperimentConfig& cfg, Artifacts& art) {
    const json& b = cfg.block;
    NetworkSpec net;
    for (const auto& g : b.at("gammas")) net.gammas.push_back(g.get<double>());
    net.L = static_cast<int>(net.gammas.size()) - 1;
    net.activation = make_activation(b.value("activation", std::string("tanh")));

    EngineParams params;
    params.M = b.value("M", 2000);
    params.grid_points = b.value("grid_points", 1200);

    DeepPrediction pred;
    json gmm_block;
    if (b.contains("thetas")) {
        std::vector<double> thetas = b.at("thetas").get<std::vector<double>>();
        const GmmInit init = gmm_init(thetas, net.gammas[0]);
        DeformedMPLaw mu0_law(net.gammas[0], DiscreteMeasure::point_mass(1.0));
        pred = propagate_bulk(net, mu0_law.make_bulk_law(params.grid_points, params.eta,
                                                         params.M),
                              params);
        propagate_spikes(net, pred, init.spike_list(), params);
        json comps = json::array();
        for (const auto& c : init.components)
            comps.push_back(json{{"index", c.index},
                                 {"theta", c.theta},
                                 {"above_threshold", c.above_threshold},
                                 {"lambda0", c.lambda0},
                                 {"base_alignment", c.base_alignment}});
        gmm_block = json{{"gamma0", init.gamma0}, {"components", comps}};
        art.files.push_back({"density_layer0.csv", csv_density(pred.mu0)});
    } else {
        DiscreteMeasure mu0 = measure_from_json(json{{"atoms", b.at("mu0_atoms")}});
        pred = propagate_bulk(net, mu0, params);
        std::vector<std::pair<int, double>> spikes;
        int idx = 1;
        for (const auto& s : b.at("spikes")) spikes.push_back({idx++, s.get<double>()});
        propagate_spikes(net, pred, spikes, params);
    }

    art.report["activation"] = to_json(net.activation);
    art.report["prediction"] = to_json(pred);
    if (!gmm_block.is_null()) art.report["gmm"] = gmm_block;
    for (int ell = 1; ell <= net.L; ++ell)
        art.files.push_back({"density_layer" + std::to_string(ell) + ".csv",
                             csv_density(pred.mu_at(ell))});
}

void run_simulate_deep(const ExperimentConfig& cfg, Artifacts& art) {
    const json& b = cfg.block;
    DeepSimConfig sim;
    sim.n = static_cast<int>(get_num(b, "n"));
    for (const auto& d : b.at("dims")) sim.dims.push_back(d.get<int>());
    if (b.contains("thetas")) sim.thetas = b.at("thetas").get<std::vector<double>>();
    sim.activation_name = b.value("activation", std::string("tanh"));
    sim.trials = b.value("trials", 10);
    sim.outlier_eps = b.value("outlier_eps", 0.1);
    sim.M = b.value("M", 2000);
    sim.seed = cfg.seed;
    sim.workers = cfg.workers;

    const DeepExperimentResult res = run_deep_experiment(sim);
    art.report["experiment"] = to_json(res);
    art.report["activation"] = to_json(make_activation(sim.activation_name));

    for (std::size_t t = 0; t < res.trials.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "trial_%03zu.json", t);
        art.files.push_back({name, to_json(res.trials[t]).dump(1)});
    }

    // Aggregate histograms with density overlays.
    for (int ell = 0; ell <= sim.L(); ++ell) {
        Histogram agg;
        bool first = true;
        for (const auto& trial : res.trials) {
            if (trial.failed) continue;
            const Histogram& h = trial.layers[ell].hist;
            if (first) {
                agg = h;
                first = false;
            } else {
                // re-bin into the first trial's frame
                for (std::size_t i = 0; i < h.counts.size(); ++i) {
                    const double c = h.center(i);
                    if (c < agg.lo || c > agg.hi || h.counts[i] == 0) continue;
                    int idx = static_cast<int>((c - agg.lo) / agg.bin_width());
                    idx = std::clamp(idx, 0, static_cast<int>(agg.counts.size()) - 1);
                    agg.counts[idx] += h.counts[i];
                }
            }
        }
        const BulkLaw& law = ell == 0 ? res.prediction.mu0 : res.prediction.mu_at(ell);
        art.files.push_back({"hist_layer" + std::to_string(ell) + ".csv",
                             csv_histogram(agg, law)});
    }

    std::string csv =
        "ell,spike_index,predicted_survived,predicted_eigenvalue,predicted_alignment,"
        "emp_eig_mean,emp_eig_stderr,emp_align_mean,emp_align_stderr,n_obs\n";
    for (const auto& r : res.agg.rows) {
        char line[256];
        std::snprintf(line, sizeof(line), "%d,%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n",
                      r.ell, r.spike_index, r.predicted_survived ? 1 : 0,
                      r.predicted_eigenvalue, r.predicted_alignment, r.emp_eig_mean,
                      r.emp_eig_stderr, r.emp_align_mean, r.emp_align_stderr, r.n_obs);
        csv += line;
    }
    art.files.push_back({"comparison.csv", csv});
}

TrainedCkSpec trained_spec_from_block(const json& b) {
    TrainedCkSpec spec;
    spec.gamma0 = get_num(b, "gamma0");
    spec.gamma1 = get_num(b, "gamma1");
    spec.eta_total = get_num(b, "eta_total");
    spec.sigma_eps = b.value("sigma_eps", 0.0);
    spec.act = make_activation(b.value("activation", std::string("erf")));
    spec.label_act = make_activation(b.value("label_activation", std::string("erf")));
    spec.M = b.value("M", 2000);
    return spec;
}

void run_predict_trained(const ExperimentConfig& cfg, Artifacts& art) {
    const json& b = cfg.block;
    TrainedCkSpec spec = trained_spec_from_block(b);
    const TrainedCkPrediction pred = predict_trained_ck(spec);
    art.report["prediction"] = to_json(pred);
    art.report["activation"] = to_json(spec.act);
    art.report["label_activation"] = to_json(spec.label_act);

    if (b.contains("sweep")) {
        const TrainedCkModel model = build_trained_ck_model(spec);
        std::string csv = "eta_total,label_alignment,lambda_max,spike_exists\n";
        for (const auto& pt : b.at("sweep")) {
            TrainedCkSpec s = spec;
            s.eta_total = pt.at("eta_total").get<double>();
            if (pt.contains("gamma0")) s.gamma0 = pt.at("gamma0").get<double>();
            if (pt.contains("gamma1")) s.gamma1 = pt.at("gamma1").get<double>();
            if (pt.contains("sigma_eps")) s.sigma_eps = pt.at("sigma_eps").get<double>();
            const TrainedCkPrediction p = predict_trained_ck(s, &model);
            char line[160];
            std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g,%d\n", s.eta_total,
                          p.label_alignment, p.lambda_max, p.spike_exists ? 1 : 0);
            csv += line;
        }
        art.files.push_back({"sweep.csv", csv});
    }
}

void run_simulate_trained(const ExperimentConfig& cfg, Artifacts& art) {
    const json& b = cfg.block;
    GdSimConfig sim;
    sim.n = static_cast<int>(get_num(b, "n"));
    sim.d = static_cast<int>(get_num(b, "d"));
    sim.N = static_cast<int>(get_num(b, "N"));
    sim.eta_schedule = b.at("eta_schedule").get<std::vector<double>>();
    sim.sigma_eps = b.value("sigma_eps", 0.0);
    sim.activation_name = b.value("activation", std::string("erf"));
    sim.label_activation_name = b.value("label_activation", std::string("erf"));
    sim.trials = b.value("trials", 10);
    sim.outlier_eps = b.value("outlier_eps", 0.1);
    sim.M = b.value("M", 2000);
    sim.seed = cfg.seed;
    sim.workers = cfg.workers;

    const GdExperimentResult res = run_gd_experiment(sim);
    art.report["experiment"] = to_json(res);
    for (std::size_t t = 0; t < res.trials.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "trial_%03zu.json", t);
        art.files.push_back({name, to_json(res.trials[t]).dump(1)});
    }
    char line[256];
    std::string csv =
        "predicted_lambda_max,predicted_alignment,emp_eig_mean,emp_eig_stderr,"
        "emp_align_mean,emp_align_stderr,trials_with_outlier,trials_ok\n";
    std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d\n",
                  res.prediction.lambda_max, res.prediction.label_alignment,
                  res.agg.top_eig_mean, res.agg.top_eig_stderr, res.agg.align_mean,
                  res.agg.align_stderr, res.agg.trials_with_outlier, res.agg.trials_ok);
    csv += line;
    art.files.push_back({"comparison.csv", csv});
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    Artifacts art;
    art.report["mode"] = mode_to_string(cfg.mode);
    art.report["version"] = kVersion;
    art.report["seed"] = cfg.seed;

    log << "[ckspectra] mode=" << mode_to_string(cfg.mode) << " seed=" << cfg.seed
        << " workers=" << cfg.workers << "\n";

    switch (cfg.mode) {
        case Mode::Density: run_density(cfg, art); break;
        case Mode::PredictDeep: run_predict_deep(cfg, art); break;
        case Mode::SimulateDeep: run_simulate_deep(cfg, art); break;
        case Mode::PredictTrained: run_predict_trained(cfg, art); break;
        case Mode::SimulateTrained: run_simulate_trained(cfg, art); break;
    }

    // Everything computed; only now touch the filesystem.
    const fs::path outdir(cfg.output);
    fs::create_directories(outdir);

    json manifest{{"version", kVersion},
                  {"mode", mode_to_string(cfg.mode)},
                  {"seed", cfg.seed},
                  {"config_hash", fnv1a64(cfg.raw.dump())}};
    {
        std::ofstream f(outdir / "report.json");
        f << art.report.dump(1) << "\n";
    }
    for (const auto& [name, content] : art.files) {
        std::ofstream f(outdir / name);
        f << content;
    }
    {
        std::ofstream f(outdir / "manifest.json");
        f << manifest.dump(1) << "\n";
    }
    log << "[ckspectra] wrote " << (art.files.size() + 2) << " artifacts to " << cfg.output
        << "\n";
}

int run_from_file(const std::string& config_path, const RunOverrides& overrides,
                  std::ostream& log, std::ostream& err) {
    json j;
    try {
        std::ifstream f(config_path);
        if (!f) throw ConfigError("cannot open config file '" + config_path + "'");
        f >> j;
    } catch (const json::exception& e) {
        err << "config parse error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return 2;
    }

    try {
        if (overrides.seed) j["seed"] = *overrides.seed;
        if (overrides.output) j["output"] = *overrides.output;
        if (overrides.workers) j["workers"] = *overrides.workers;
        ExperimentConfig cfg = parse_config(j);
        run_experiment(cfg, log);
        return 0;
    } catch (const ConfigError& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const ActivationError& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const MeasureError& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const SimError& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace ckspectra

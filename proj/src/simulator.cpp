#include "ckspectra/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace ckspectra {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t derive_trial_seed(uint64_t master_seed, uint64_t trial_index) {
    uint64_t state = master_seed;
    uint64_t h = splitmix64(state);
    state = h ^ (trial_index + 0x632be59bd9b4e019ull);
    h = splitmix64(state);
    if (h == 0) h = 0x9e3779b97f4a7c15ull;
    return h;
}

double TrialRng::uniform() {
    // 53-bit mantissa in (0, 1]
    const uint64_t bits = splitmix64(state_) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

double TrialRng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
}

void parallel_trials(int trials, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, trials));
    if (workers == 1) {
        for (int t = 0; t < trials; ++t) fn(t);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) fn(t);
        });
    }
    for (auto& th : pool) th.join();
}

void DeepSimConfig::validate() const {
    if (n < 64) throw SimError("DeepSimConfig: n must be at least 64");
    if (dims.size() < 2) throw SimError("DeepSimConfig: need d_0..d_L with L >= 1");
    for (int d : dims)
        if (d < 64) throw SimError("DeepSimConfig: widths must be at least 64");
    const int r = static_cast<int>(thetas.size());
    if (r > std::min(n, dims[0]) / 4)
        throw SimError("DeepSimConfig: too many signal components");
    if (trials < 1) throw SimError("DeepSimConfig: trials must be positive");
    if (!(outlier_eps >= 0.0)) throw SimError("DeepSimConfig: bad outlier_eps");
}

double GdSimConfig::eta_total() const {
    double s = 0.0;
    for (double e : eta_schedule) s += e;
    return s;
}

void GdSimConfig::validate() const {
    if (n < 64 || d < 64 || N < 64) throw SimError("GdSimConfig: sizes must be at least 64");
    if (eta_schedule.empty()) throw SimError("GdSimConfig: empty learning-rate schedule");
    if (sigma_eps < 0.0) throw SimError("GdSimConfig: negative label noise");
    if (trials < 1) throw SimError("GdSimConfig: trials must be positive");
}

Histogram make_histogram(const std::vector<double>& values, int bins, double lo, double hi) {
    Histogram h;
    h.lo = lo;
    h.hi = hi > lo ? hi : lo + 1.0;
    h.counts.assign(std::max(bins, 1), 0);
    const double w = h.bin_width();
    for (double v : values) {
        if (v < h.lo || v > h.hi) continue;
        int idx = static_cast<int>((v - h.lo) / w);
        idx = std::clamp(idx, 0, static_cast<int>(h.counts.size()) - 1);
        ++h.counts[idx];
    }
    return h;
}

namespace {

void fill_gaussian(Eigen::Ref<Eigen::MatrixXd> m, TrialRng& rng, double scale = 1.0) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * rng.gaussian();
}

void orthonormalize_columns(Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index k = 0; k < j; ++k)
            m.col(j) -= m.col(k).dot(m.col(j)) * m.col(k);
        const double nrm = m.col(j).norm();
        if (nrm < 1e-8) throw SimError("orthonormalize: degenerate draw");
        m.col(j) /= nrm;
    }
}

void apply_activation(Eigen::Ref<Eigen::MatrixXd> m, const NormalizedActivation& act,
                      double scale) {
    const double c0 = act.c0, inv_c1 = 1.0 / act.c1;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            m(i, j) = (act.raw(m(i, j)) - c0) * inv_c1 * scale;
}

void spectrum_diagnostics(const Eigen::MatrixXd& K, MatrixSpectrum& spec) {
    double max_off = 0.0, max_dev = 0.0;
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
        max_dev = std::max(max_dev, std::abs(std::sqrt(std::max(K(j, j), 0.0)) - 1.0));
        for (Eigen::Index i = 0; i < j; ++i) max_off = std::max(max_off, std::abs(K(i, j)));
    }
    spec.max_offdiag = max_off;
    spec.max_norm_dev = max_dev;
}

}  // namespace

GmmData gen_gmm(const DeepSimConfig& cfg, int trial) {
    cfg.validate();
    TrialRng rng(derive_trial_seed(cfg.seed, static_cast<uint64_t>(trial)));
    const int d = cfg.dims[0], n = cfg.n, r = static_cast<int>(cfg.thetas.size());

    GmmData data;
    data.A.resize(d, r);
    data.B.resize(n, r);
    if (r > 0) {
        fill_gaussian(data.A, rng);
        fill_gaussian(data.B, rng);
        orthonormalize_columns(data.A);
        orthonormalize_columns(data.B);
    }
    data.X.resize(d, n);
    fill_gaussian(data.X, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    for (int i = 0; i < r; ++i)
        data.X.noalias() += cfg.thetas[i] * data.A.col(i) * data.B.col(i).transpose();
    return data;
}

std::vector<Eigen::MatrixXd> forward_ck(const Eigen::MatrixXd& X,
                                        const std::vector<int>& hidden_dims,
                                        const NormalizedActivation& act, TrialRng& rng) {
    const Eigen::Index n = X.cols();
    std::vector<Eigen::MatrixXd> grams;
    grams.reserve(hidden_dims.size());

    Eigen::MatrixXd current = X;
    constexpr Eigen::Index kBlock = 512;
    for (int d_l : hidden_dims) {
        if (d_l <= 0) throw SimError("forward_ck: nonpositive width");
        Eigen::MatrixXd next(d_l, n);
        Eigen::MatrixXd wblock(kBlock, current.rows());
        for (Eigen::Index r0 = 0; r0 < d_l; r0 += kBlock) {
            const Eigen::Index rows = std::min<Eigen::Index>(kBlock, d_l - r0);
            fill_gaussian(wblock.topRows(rows), rng);
            next.middleRows(r0, rows).noalias() = wblock.topRows(rows) * current;
        }
        apply_activation(next, act, 1.0 / std::sqrt(static_cast<double>(d_l)));
        grams.emplace_back(n, n);
        grams.back().noalias() = next.transpose() * next;
        current = std::move(next);
    }
    return grams;
}

std::vector<double> extract_outliers(const std::vector<double>& eigenvalues,
                                     const std::vector<Interval>& support, double eps) {
    std::vector<double> out;
    for (double v : eigenvalues) {
        double dist = std::abs(v);  // the spectrum set always carries {0}
        for (const auto& iv : support) {
            if (iv.contains(v)) {
                dist = 0.0;
                break;
            }
            dist = std::min(dist, std::min(std::abs(v - iv.lo), std::abs(v - iv.hi)));
        }
        if (dist > eps) out.push_back(v);
    }
    std::sort(out.begin(), out.end(), std::greater<double>());
    return out;
}

double alignment(const Eigen::VectorXd& vhat, const Eigen::VectorXd& target) {
    if (std::abs(vhat.norm() - 1.0) > 1e-8 || std::abs(target.norm() - 1.0) > 1e-8)
        throw SimError("alignment: inputs must be unit vectors");
    const double ip = vhat.dot(target);
    return std::min(ip * ip, 1.0);
}

namespace {

struct MeanVar {
    double mean = 0.0, stderr_ = 0.0;
    int n = 0;
};

MeanVar summarize(const std::vector<double>& v) {
    MeanVar mv;
    mv.n = static_cast<int>(v.size());
    if (v.empty()) return mv;
    double s = 0.0;
    for (double x : v) s += x;
    mv.mean = s / mv.n;
    if (mv.n > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - mv.mean) * (x - mv.mean);
        mv.stderr_ = std::sqrt(ss / (mv.n - 1) / mv.n);
    }
    return mv;
}

MatrixSpectrum analyze_spectrum(const Eigen::MatrixXd& K,
                                const std::vector<Interval>& support, double eps,
                                const Eigen::MatrixXd* tracked,  // n x r directions
                                bool need_vectors) {
    MatrixSpectrum spec;
    spectrum_diagnostics(K, spec);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.compute(K, need_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw SimError("eigensolver failed");

    spec.eigenvalues.assign(es.eigenvalues().data(),
                            es.eigenvalues().data() + es.eigenvalues().size());
    const double top = spec.eigenvalues.back();
    spec.hist = make_histogram(spec.eigenvalues, 80, 0.0, std::max(top * 1.02, 1e-6));

    const std::vector<double> out_vals = extract_outliers(spec.eigenvalues, support, eps);
    for (double v : out_vals) {
        OutlierObs obs;
        obs.value = v;
        if (tracked && need_vectors) {
            // locate the eigenvector for this eigenvalue
            Eigen::Index idx = 0;
            double best = 1e300;
            for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
                const double d = std::abs(es.eigenvalues()(i) - v);
                if (d < best) {
                    best = d;
                    idx = i;
                }
            }
            const Eigen::VectorXd vec = es.eigenvectors().col(idx);
            double amax = -1.0;
            for (Eigen::Index j = 0; j < tracked->cols(); ++j) {
                const double a = alignment(vec, tracked->col(j));
                obs.alignments.push_back(a);
                if (a > amax) {
                    amax = a;
                    obs.matched_index = static_cast<int>(j) + 1;
                }
            }
        }
        spec.outliers.push_back(std::move(obs));
    }
    return spec;
}

}  // namespace

DeepExperimentResult run_deep_experiment(const DeepSimConfig& cfg) {
    cfg.validate();
    const NormalizedActivation act = make_activation(cfg.activation_name);

    DeepExperimentResult result;
    const double gamma0 = static_cast<double>(cfg.n) / cfg.dims[0];
    result.init = gmm_init(cfg.thetas, gamma0);

    NetworkSpec net;
    net.L = cfg.L();
    for (int d : cfg.dims) net.gammas.push_back(static_cast<double>(cfg.n) / d);
    net.activation = act;

    EngineParams params;
    params.M = cfg.M;
    params.grid_points = cfg.grid_points;

    DeformedMPLaw mu0_law(gamma0, DiscreteMeasure::point_mass(1.0));
    result.mu0_support = mu0_law.support();
    result.prediction = propagate_bulk(net, mu0_law.make_bulk_law(params.grid_points,
                                                                  params.eta, params.M),
                                       params);
    propagate_spikes(net, result.prediction, result.init.spike_list(), params);

    const int L = net.L;
    std::vector<std::vector<Interval>> supports(L + 1);
    supports[0] = mu0_law.support();
    for (int ell = 1; ell <= L; ++ell) supports[ell] = result.prediction.law_at(ell).support();

    // Engine-side survivor sets per layer (component indices, 1-based).
    // A survivor is "required" when its predicted eigenvalue clears the
    // extraction band by more than eps/2, "optional" when it sits within
    // eps/2 of the band edge (finite-size detection is a coin flip there).
    const double margin = 0.5 * cfg.outlier_eps;
    std::vector<std::vector<int>> predicted_required(L + 1), predicted_optional(L + 1);
    const auto classify = [&](int ell, int index, double edge_distance) {
        if (edge_distance > cfg.outlier_eps + margin)
            predicted_required[ell].push_back(index);
        else if (edge_distance > cfg.outlier_eps - margin)
            predicted_optional[ell].push_back(index);
        // closer than eps - margin: not expected to be resolved at all
    };
    for (const auto& c : result.init.components)
        if (c.above_threshold) classify(0, c.index, c.lambda0 - mu0_law.support_sup());
    for (const auto& traj : result.prediction.trajectories)
        for (int ell = 1; ell <= L; ++ell)
            if (traj.survived_at(ell))
                classify(ell, traj.index, traj.layers[ell - 1].edge_distance);

    const bool track = !cfg.thetas.empty();
    result.trials.assign(cfg.trials, SimResult{});
    std::vector<int> hidden(cfg.dims.begin() + 1, cfg.dims.end());

    parallel_trials(cfg.trials, cfg.workers, [&](int t) {
        SimResult& res = result.trials[t];
        res.trial = t;
        try {
            GmmData data = gen_gmm(cfg, t);
            // weights draw from their own derived stream, independent of the data
            TrialRng wrng(derive_trial_seed(cfg.seed ^ 0x5bf03635ull, static_cast<uint64_t>(t)));

            Eigen::MatrixXd K0(cfg.n, cfg.n);
            K0.noalias() = data.X.transpose() * data.X;
            res.layers.push_back(analyze_spectrum(K0, supports[0], cfg.outlier_eps,
                                                  track ? &data.B : nullptr, track));

            std::vector<Eigen::MatrixXd> grams = forward_ck(data.X, hidden, act, wrng);
            for (int ell = 1; ell <= L; ++ell)
                res.layers.push_back(analyze_spectrum(grams[ell - 1], supports[ell],
                                                      cfg.outlier_eps,
                                                      track ? &data.B : nullptr, track));
        } catch (const std::exception& e) {
            res.failed = true;
            res.error = e.what();
        }
    });

    // Aggregate.
    DeepAggregate& agg = result.agg;
    agg.pattern_match_count.assign(L + 1, 0);
    agg.no_outlier_count.assign(L + 1, 0);
    std::vector<std::vector<std::vector<double>>> eig_obs(L + 1), align_obs(L + 1);
    const int r = static_cast<int>(cfg.thetas.size());
    for (int ell = 0; ell <= L; ++ell) {
        eig_obs[ell].resize(r);
        align_obs[ell].resize(r);
    }

    for (const auto& res : result.trials) {
        if (res.failed) continue;
        ++agg.trials_ok;
        for (int ell = 0; ell <= L; ++ell) {
            const auto& spec = res.layers[ell];
            if (spec.outliers.empty()) ++agg.no_outlier_count[ell];
            std::vector<int> observed;
            for (const auto& o : spec.outliers)
                if (o.matched_index > 0) observed.push_back(o.matched_index);
            std::sort(observed.begin(), observed.end());
            const bool dup = std::adjacent_find(observed.begin(), observed.end()) !=
                             observed.end();
            // required subset of observed subset of required + optional
            bool match = !dup;
            for (int i : predicted_required[ell])
                match = match && std::binary_search(observed.begin(), observed.end(), i);
            for (int i : observed)
                match = match &&
                        (std::find(predicted_required[ell].begin(),
                                   predicted_required[ell].end(),
                                   i) != predicted_required[ell].end() ||
                         std::find(predicted_optional[ell].begin(),
                                   predicted_optional[ell].end(),
                                   i) != predicted_optional[ell].end());
            if (match) {
                ++agg.pattern_match_count[ell];
                for (const auto& o : spec.outliers) {
                    const int i = o.matched_index - 1;
                    if (i < 0) continue;
                    eig_obs[ell][i].push_back(o.value);
                    align_obs[ell][i].push_back(o.alignments[i]);
                }
            }
        }
    }

    for (int ell = 0; ell <= L; ++ell) {
        for (const auto& c : result.init.components) {
            SpikeLayerAgg row;
            row.spike_index = c.index;
            row.ell = ell;
            if (ell == 0) {
                row.predicted_survived = c.above_threshold;
                row.predicted_eigenvalue = c.lambda0;
                row.predicted_alignment = c.base_alignment;
                if (c.above_threshold)
                    row.predicted_edge_distance = c.lambda0 - mu0_law.support_sup();
            } else {
                for (const auto& traj : result.prediction.trajectories) {
                    if (traj.index != c.index) continue;
                    row.predicted_survived = traj.survived_at(ell);
                    if (row.predicted_survived) {
                        row.predicted_eigenvalue = traj.layers[ell - 1].z_val;
                        row.predicted_alignment =
                            traj.layers[ell - 1].alignment_product * c.base_alignment;
                        row.predicted_edge_distance = traj.layers[ell - 1].edge_distance;
                    }
                }
            }
            row.predicted_marginal =
                row.predicted_survived &&
                std::find(predicted_required[ell].begin(), predicted_required[ell].end(),
                          c.index) == predicted_required[ell].end();
            const MeanVar ev = summarize(eig_obs[ell][c.index - 1]);
            const MeanVar av = summarize(align_obs[ell][c.index - 1]);
            row.emp_eig_mean = ev.mean;
            row.emp_eig_stderr = ev.stderr_;
            row.emp_align_mean = av.mean;
            row.emp_align_stderr = av.stderr_;
            row.n_obs = ev.n;
            agg.rows.push_back(row);
        }
    }
    return result;
}

TrainData gen_train_data(const GdSimConfig& cfg, const NormalizedActivation& label_act,
                         TrialRng& rng, const Eigen::VectorXd* beta) {
    TrainData data;
    if (beta) {
        data.beta = *beta;
    } else {
        data.beta.resize(cfg.d);
        for (int i = 0; i < cfg.d; ++i) data.beta(i) = rng.gaussian();
        data.beta /= data.beta.norm();
    }

    data.X.resize(cfg.n, cfg.d);
    fill_gaussian(data.X, rng);
    const Eigen::VectorXd proj = data.X * data.beta;
    data.y.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i)
        data.y(i) = label_act.eval(proj(i)) + cfg.sigma_eps * rng.gaussian();
    return data;
}

double spectral_norm(const Eigen::MatrixXd& m, int iterations) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(m.cols()).normalized();
    double s = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = m.transpose() * (m * v);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        w /= nw;
        const double s_new = std::sqrt(nw);
        if (std::abs(s_new - s) < 1e-12 * std::max(1.0, s_new) && it > 4) return s_new;
        s = s_new;
        v = std::move(w);
    }
    return s;
}

TrainOutput train_two_layer(const GdSimConfig& cfg, const NormalizedActivation& act,
                            const TrainData& data, TrialRng& rng) {
    const int n = cfg.n, d = cfg.d, N = cfg.N;
    TrainOutput out;
    Eigen::MatrixXd W0(d, N);
    fill_gaussian(W0, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    out.a.resize(N);
    for (int j = 0; j < N; ++j) out.a(j) = rng.gaussian() / std::sqrt(static_cast<double>(N));

    const double sqrtN = std::sqrt(static_cast<double>(N));
    Eigen::MatrixXd W = W0;
    Eigen::MatrixXd pre(n, N), grad_in(n, N);
    for (double eta_t : cfg.eta_schedule) {
        pre.noalias() = data.X * W;
        // residual of the prediction
        Eigen::VectorXd f(n);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < N; ++j) s += act.eval(pre(i, j)) * out.a(j);
            f(i) = s / sqrtN;
        }
        const Eigen::VectorXd resid = data.y - f;
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < n; ++i)
                grad_in(i, j) = resid(i) * out.a(j) * act.deriv(pre(i, j)) / sqrtN;
        // W <- W + eta sqrt(N) G,  G = (1/n) X^T grad_in
        W.noalias() += (eta_t * sqrtN / n) * (data.X.transpose() * grad_in);
    }

    out.update_norm = spectral_norm(W - W0);
    const double b = act.b_sigma;
    Eigen::MatrixXd approx = W0;
    approx.noalias() += (b * cfg.eta_total() / n) * (data.X.transpose() * data.y) *
                        out.a.transpose();
    out.rank_one_residual = spectral_norm(W - approx);
    out.W = std::move(W);
    return out;
}

GdExperimentResult run_gd_experiment(const GdSimConfig& cfg) {
    cfg.validate();
    const NormalizedActivation act = make_activation(cfg.activation_name);
    const NormalizedActivation label_act = make_activation(cfg.label_activation_name);

    GdExperimentResult result;
    TrainedCkSpec spec;
    spec.gamma0 = static_cast<double>(cfg.N) / cfg.d;
    spec.gamma1 = static_cast<double>(cfg.N) / cfg.n;
    spec.eta_total = cfg.eta_total();
    spec.sigma_eps = cfg.sigma_eps;
    spec.act = act;
    spec.label_act = label_act;
    spec.M = cfg.M;
    result.prediction = predict_trained_ck(spec);

    result.trials.assign(cfg.trials, SimResult{});
    const std::vector<Interval>& k_support = result.prediction.k_support;

    parallel_trials(cfg.trials, cfg.workers, [&](int t) {
        SimResult& res = result.trials[t];
        res.trial = t;
        try {
            TrialRng rng(derive_trial_seed(cfg.seed, static_cast<uint64_t>(t)));
            const TrainData train = gen_train_data(cfg, label_act, rng);
            const TrainOutput trained = train_two_layer(cfg, act, train, rng);
            res.rank_one_residual = trained.rank_one_residual;
            res.update_norm = trained.update_norm;

            // Independent test set; labels reuse the same target direction.
            const TrainData test = gen_train_data(cfg, label_act, rng, &train.beta);

            Eigen::MatrixXd features(cfg.n, cfg.N);
            features.noalias() = test.X * trained.W;
            apply_activation(features, act, 1.0);
            // ||E Y|| estimate, debiased for the column-mean sampling noise
            const Eigen::RowVectorXd colmean = features.colwise().mean();
            double noise_floor = 0.0;
            for (int j = 0; j < cfg.N; ++j) {
                const double ss = features.col(j).squaredNorm() / cfg.n;
                noise_floor += (ss - colmean(j) * colmean(j)) / cfg.n;
            }
            const double mean_sq =
                std::max(0.0, colmean.squaredNorm() - noise_floor);
            res.mean_feature_norm =
                std::sqrt(mean_sq * static_cast<double>(cfg.n) / cfg.N);

            Eigen::MatrixXd K(cfg.n, cfg.n);
            K.noalias() = features * features.transpose() / static_cast<double>(cfg.N);

            // tau diagnostics on the trained weight columns
            Eigen::MatrixXd wtw(cfg.N, cfg.N);
            wtw.noalias() = trained.W.transpose() * trained.W;
            MatrixSpectrum wdiag;
            spectrum_diagnostics(wtw, wdiag);

            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
            if (es.info() != Eigen::Success) throw SimError("eigensolver failed");
            MatrixSpectrum spec_k;
            spec_k.max_offdiag = wdiag.max_offdiag;
            spec_k.max_norm_dev = wdiag.max_norm_dev;
            spec_k.eigenvalues.assign(es.eigenvalues().data(),
                                      es.eigenvalues().data() + cfg.n);
            const double top = spec_k.eigenvalues.back();
            spec_k.hist = make_histogram(spec_k.eigenvalues, 80, 0.0,
                                         std::max(top * 1.02, 1e-6));
            for (double v : extract_outliers(spec_k.eigenvalues, k_support, cfg.outlier_eps)) {
                OutlierObs obs;
                obs.value = v;
                spec_k.outliers.push_back(obs);
            }

            const Eigen::VectorXd u_hat = es.eigenvectors().col(cfg.n - 1);
            res.top_eigenvalue = top;
            res.top_alignment =
                std::abs(test.y.dot(u_hat)) / std::sqrt(static_cast<double>(cfg.n));
            res.layers.push_back(std::move(spec_k));
        } catch (const std::exception& e) {
            res.failed = true;
            res.error = e.what();
        }
    });

    std::vector<double> eigs, aligns, residuals, updates;
    for (const auto& res : result.trials) {
        if (res.failed) continue;
        ++result.agg.trials_ok;
        eigs.push_back(res.top_eigenvalue);
        aligns.push_back(res.top_alignment);
        residuals.push_back(res.rank_one_residual);
        updates.push_back(res.update_norm);
        if (!res.layers.empty() && !res.layers[0].outliers.empty())
            ++result.agg.trials_with_outlier;
    }
    const MeanVar ev = summarize(eigs);
    const MeanVar av = summarize(aligns);
    const MeanVar rv = summarize(residuals);
    const MeanVar uv = summarize(updates);
    result.agg.top_eig_mean = ev.mean;
    result.agg.top_eig_stderr = ev.stderr_;
    result.agg.align_mean = av.mean;
    result.agg.align_stderr = av.stderr_;
    result.agg.residual_mean = rv.mean;
    result.agg.update_norm_mean = uv.mean;
    return result;
}

}  // namespace ckspectra

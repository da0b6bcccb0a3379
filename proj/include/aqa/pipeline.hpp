#pragma once

// The three assessment frameworks wired end to end:
//   c3d-svr       averaged clip features -> SVR on the overall score
//   c3d-lstm      clip features -> LSTM heads -> final-step scores
//   c3d-lstm-svr  SVR on the LSTM's final hidden activations, per head
//
// The feature network is warm-up trained once per experiment and then
// frozen; per-split repeats only retrain the regressor on top, mirroring
// a fixed pretrained extractor.

#include <string>
#include <vector>

#include "aqa/evalkit.hpp"
#include "aqa/featnet.hpp"
#include "aqa/feedback.hpp"
#include "aqa/seqscore.hpp"
#include "aqa/svr.hpp"
#include "aqa/synthbench.hpp"

namespace aqa {

enum class PipelineKind { c3d_svr, c3d_lstm, c3d_lstm_svr };

inline std::string to_string(PipelineKind k) {
    switch (k) {
        case PipelineKind::c3d_svr: return "c3d-svr";
        case PipelineKind::c3d_lstm: return "c3d-lstm";
        default: return "c3d-lstm-svr";
    }
}

inline PipelineKind pipeline_from_string(const std::string& s) {
    if (s == "c3d-svr") return PipelineKind::c3d_svr;
    if (s == "c3d-lstm") return PipelineKind::c3d_lstm;
    if (s == "c3d-lstm-svr") return PipelineKind::c3d_lstm_svr;
    throw std::invalid_argument("unknown pipeline: " + s);
}

struct SvrGrid {
    std::vector<double> C_values{1.0, 10.0, 100.0};
    std::vector<double> epsilon_fractions{0.01, 0.05};  // of the target range
};

struct PipelineConfig {
    PipelineKind kind = PipelineKind::c3d_svr;
    FeatNetConfig featnet;
    std::size_t clip_len = 16;
    std::size_t stride = 16;
    std::size_t warmup_iterations = 400;
    double warmup_lr = 0.01;
    TrainSchedule schedule;  // LSTM pipelines
    SeqScorerConfig scorer;
    SvrGrid grid;
    bool difficulty_feature = false;  // append known difficulty to SVR features
    bool per_head_svr = false;        // c3d-svr: separate exec/diff models
};

// Deterministic center crop to the featnet input size.
inline VideoSample center_crop(const VideoSample& sample, std::size_t crop_h,
                               std::size_t crop_w) {
    const std::size_t H = sample.height(), W = sample.width();
    if (crop_h > H || crop_w > W)
        throw std::invalid_argument("center_crop: crop exceeds frame size");
    if (crop_h == H && crop_w == W) return sample;
    const std::size_t oh = (H - crop_h) / 2, ow = (W - crop_w) / 2;
    VideoSample out = sample;
    out.frames = Tensor({sample.channels(), sample.length(), crop_h, crop_w});
    for (std::size_t c = 0; c < sample.channels(); ++c)
        for (std::size_t t = 0; t < sample.length(); ++t)
            for (std::size_t h = 0; h < crop_h; ++h)
                for (std::size_t w = 0; w < crop_w; ++w)
                    out.frames.at4(c, t, h, w) =
                        sample.frames.at4(c, t, oh + h, ow + w);
    return out;
}

class Pipeline {
public:
    PipelineConfig cfg;
    FeatNet featnet;
    std::vector<std::vector<Tensor>> clip_feats;  // per sample, per clip
    std::vector<Tensor> avg_feats;                // per sample

    // Warm-up trains the feature network on the given train ids (with a
    // scalar regression head on the normalized overall score), freezes
    // it, and extracts features for every sample.
    void prepare(const SynthDataset& ds, const std::vector<std::size_t>& warmup_ids,
                 std::uint64_t seed) {
        featnet = build_featnet(cfg.featnet, seed);

        std::vector<ClipSequence> clips = segment_all(ds);

        if (cfg.warmup_iterations > 0 && !warmup_ids.empty()) {
            double max_overall = 0.0;
            for (std::size_t id : warmup_ids)
                max_overall = std::max(max_overall,
                                       std::fabs(ds.samples[id].labels.overall));
            if (max_overall == 0.0) max_overall = 1.0;

            FcLayer head;
            head.weight = Tensor({1, featnet.feature_dim});
            head.bias = Tensor({1});
            Rng rng(seed ^ 0x5eedf00dull);
            init_uniform_glorot(head.weight, featnet.feature_dim, 1, rng);

            for (std::size_t it = 0; it < cfg.warmup_iterations; ++it) {
                const std::size_t id = warmup_ids[rng.index(warmup_ids.size())];
                const ClipSequence& seq = clips[id];
                const Tensor& clip = seq.clips[rng.index(seq.count())];
                const double target = ds.samples[id].labels.overall / max_overall;

                FeatNet::Cache cache;
                Tensor feat = featnet.forward(clip, &cache);
                const std::size_t fdim = feat.size();
                Tensor flat({fdim}, std::move(feat.data));
                const double pred = fc_forward(flat, head)[0];
                const double d = pred - target;

                Tensor up({featnet.feature_dim});
                for (std::size_t j = 0; j < featnet.feature_dim; ++j)
                    up[j] = d * head.weight.data[j];
                Tensor up_shaped(cache.output.shape, std::move(up.data));
                FeatNet::Grads g = featnet.backward(cache, up_shaped);
                featnet.apply_sgd(g, cfg.warmup_lr);

                Tensor hg({featnet.feature_dim});
                for (std::size_t j = 0; j < featnet.feature_dim; ++j)
                    hg[j] = d * flat[j];
                sgd_step(head.weight, Tensor({1, featnet.feature_dim}, std::move(hg.data)),
                         cfg.warmup_lr, "warmup.head");
                Tensor bg({1});
                bg[0] = d;
                sgd_step(head.bias, bg, cfg.warmup_lr, "warmup.head");
            }
        }

        clip_feats.clear();
        avg_feats.clear();
        for (const ClipSequence& seq : clips) {
            ClipFeatures f = extract_features(featnet, seq);
            avg_feats.push_back(aggregate_average(f, cfg.featnet.norm));
            clip_feats.push_back(std::move(f.features));
        }
    }

    std::vector<ClipSequence> segment_all(const SynthDataset& ds) const {
        std::size_t max_len = 0;
        for (const VideoSample& s : ds.samples) max_len = std::max(max_len, s.length());
        std::vector<ClipSequence> clips;
        for (const VideoSample& s : ds.samples) {
            VideoSample cropped =
                center_crop(s, cfg.featnet.input_shape[2], cfg.featnet.input_shape[3]);
            clips.push_back(
                segment_clips(pad_video(cropped, max_len), cfg.clip_len, cfg.stride));
        }
        return clips;
    }

    // -- c3d-svr ------------------------------------------------------------

    std::vector<double> svr_features(const SynthDataset& ds, std::size_t id) const {
        std::vector<double> x(avg_feats[id].data.begin(), avg_feats[id].data.end());
        if (cfg.difficulty_feature) x.push_back(ds.samples[id].labels.difficulty);
        return x;
    }

    SvrModel fit_svr_grid(const std::vector<std::vector<double>>& X,
                          const std::vector<double>& y, std::uint64_t seed) const {
        double lo = y[0], hi = y[0];
        for (double v : y) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = std::max(hi - lo, 1e-9);
        const double gamma = 1.0 / double(X[0].size());

        // Hold out 20% for validation during grid search, then refit on
        // the full training set with the best cell.
        std::vector<std::size_t> ids(X.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        Rng rng(seed);
        rng.shuffle(ids);
        const std::size_t n_val = std::max<std::size_t>(1, X.size() / 5);
        const std::size_t n_fit = X.size() - n_val;

        double best_score = -1e300;
        double best_C = cfg.grid.C_values.front();
        double best_eps = cfg.grid.epsilon_fractions.front() * range;
        if (n_fit >= 2 &&
            (cfg.grid.C_values.size() > 1 || cfg.grid.epsilon_fractions.size() > 1)) {
            SvrProblem prob;
            prob.kernel = KernelSpec::rbf(gamma);
            for (std::size_t i = 0; i < n_fit; ++i) {
                prob.features.push_back(X[ids[i]]);
                prob.targets.push_back(y[ids[i]]);
            }
            for (double C : cfg.grid.C_values)
                for (double ef : cfg.grid.epsilon_fractions) {
                    prob.C = C;
                    prob.epsilon = ef * range;
                    SvrModel m = train_svr(prob);
                    std::vector<double> pv, tv;
                    for (std::size_t i = n_fit; i < X.size(); ++i) {
                        pv.push_back(predict_svr(m, X[ids[i]]));
                        tv.push_back(y[ids[i]]);
                    }
                    auto rho = spearman_rho(pv, tv);
                    double score;
                    if (rho) {
                        score = *rho;
                    } else {
                        double mse = 0.0;
                        for (std::size_t i = 0; i < pv.size(); ++i)
                            mse += (pv[i] - tv[i]) * (pv[i] - tv[i]);
                        score = -mse;
                    }
                    if (score > best_score) {
                        best_score = score;
                        best_C = C;
                        best_eps = ef * range;
                    }
                }
        }

        SvrProblem full;
        full.kernel = KernelSpec::rbf(gamma);
        full.features = X;
        full.targets = y;
        full.C = best_C;
        full.epsilon = best_eps;
        return train_svr(full);
    }

    Predictions run_c3d_svr(const SynthDataset& ds,
                            const std::vector<std::size_t>& train_ids,
                            const std::vector<std::size_t>& test_ids,
                            std::uint64_t seed) const {
        std::vector<std::vector<double>> X;
        std::vector<double> y_overall, y_exec, y_diff;
        for (std::size_t id : train_ids) {
            X.push_back(svr_features(ds, id));
            y_overall.push_back(ds.samples[id].labels.overall);
            y_exec.push_back(ds.samples[id].labels.execution);
            y_diff.push_back(ds.samples[id].labels.difficulty);
        }
        Predictions out;
        if (cfg.per_head_svr) {
            SvrModel me = fit_svr_grid(X, y_exec, seed);
            SvrModel md = fit_svr_grid(X, y_diff, seed + 1);
            const CombineRule rule = ds.samples.front().labels.rule;
            for (std::size_t id : test_ids) {
                const auto x = svr_features(ds, id);
                const double e = predict_svr(me, x), d = predict_svr(md, x);
                out.exec.push_back(e);
                out.diff.push_back(d);
                out.overall.push_back(combine_score(e, d, rule));
            }
        } else {
            SvrModel m = fit_svr_grid(X, y_overall, seed);
            for (std::size_t id : test_ids) {
                const double p = predict_svr(m, svr_features(ds, id));
                out.exec.push_back(p);
                out.diff.push_back(p);
                out.overall.push_back(p);
            }
        }
        return out;
    }

    // -- c3d-lstm -----------------------------------------------------------

    std::vector<SeqSample> seq_samples(const SynthDataset& ds,
                                       const std::vector<std::size_t>& ids) const {
        std::vector<SeqSample> out;
        for (std::size_t id : ids)
            out.push_back({clip_feats[id], ds.samples[id].labels, ds.samples[id].id});
        return out;
    }

    TrainResult train_lstm(const SynthDataset& ds,
                           const std::vector<std::size_t>& train_ids,
                           std::uint64_t seed) const {
        SeqScorerConfig sc = cfg.scorer;
        sc.feature_dim = featnet.feature_dim;
        SeqScorer scorer = SeqScorer::init(sc, seed);
        TrainSchedule sched = cfg.schedule;
        sched.seed = seed ^ 0xabcdefull;
        const std::vector<SeqSample> train = seq_samples(ds, train_ids);
        return sched.mode == TrainMode::incremental_label
                   ? train_incremental_label(train, std::move(scorer), sched)
                   : train_final_label(train, std::move(scorer), sched);
    }

    Predictions run_c3d_lstm(const SynthDataset& ds,
                             const std::vector<std::size_t>& train_ids,
                             const std::vector<std::size_t>& test_ids,
                             std::uint64_t seed) const {
        TrainResult r = train_lstm(ds, train_ids, seed);
        Predictions out;
        const CombineRule rule = ds.samples.front().labels.rule;
        for (std::size_t id : test_ids) {
            ScoreEvolution ev = predict_evolution(r.scorer, clip_feats[id]);
            out.exec.push_back(ev.final_exec);
            out.diff.push_back(ev.final_diff);
            out.overall.push_back(combine_score(ev.final_exec, ev.final_diff, rule));
        }
        return out;
    }

    // -- c3d-lstm-svr -------------------------------------------------------

    Predictions run_c3d_lstm_svr(const SynthDataset& ds,
                                 const std::vector<std::size_t>& train_ids,
                                 const std::vector<std::size_t>& test_ids,
                                 std::uint64_t seed) const {
        TrainResult r = train_lstm(ds, train_ids, seed);
        auto activ = [&](std::size_t id) {
            Tensor h = final_hidden(r.scorer, clip_feats[id]);
            std::vector<double> x(h.data.begin(), h.data.end());
            if (cfg.difficulty_feature) x.push_back(ds.samples[id].labels.difficulty);
            return x;
        };
        std::vector<std::vector<double>> X;
        std::vector<double> y_exec, y_diff;
        for (std::size_t id : train_ids) {
            X.push_back(activ(id));
            y_exec.push_back(ds.samples[id].labels.execution);
            y_diff.push_back(ds.samples[id].labels.difficulty);
        }
        SvrModel me = fit_svr_grid(X, y_exec, seed);
        SvrModel md = fit_svr_grid(X, y_diff, seed + 1);
        Predictions out;
        const CombineRule rule = ds.samples.front().labels.rule;
        for (std::size_t id : test_ids) {
            const auto x = activ(id);
            const double e = predict_svr(me, x), d = predict_svr(md, x);
            out.exec.push_back(e);
            out.diff.push_back(d);
            out.overall.push_back(combine_score(e, d, rule));
        }
        return out;
    }

    Predictions run(const SynthDataset& ds, const std::vector<std::size_t>& train_ids,
                    const std::vector<std::size_t>& test_ids, std::uint64_t seed) const {
        switch (cfg.kind) {
            case PipelineKind::c3d_svr:
                return run_c3d_svr(ds, train_ids, test_ids, seed);
            case PipelineKind::c3d_lstm:
                return run_c3d_lstm(ds, train_ids, test_ids, seed);
            default:
                return run_c3d_lstm_svr(ds, train_ids, test_ids, seed);
        }
    }

    FrameworkFn as_framework() const {
        return [this](const SynthDataset& ds, const std::vector<std::size_t>& train_ids,
                      const std::vector<std::size_t>& test_ids, std::uint64_t seed) {
            return run(ds, train_ids, test_ids, seed);
        };
    }
};

}  // namespace aqa

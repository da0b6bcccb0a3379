#pragma once

// LSTM sequence scoring over clip features: final-label training,
// incremental-label training with linearly accumulated intermediate
// targets plus a final-label fine-tune phase, and per-clip score
// evolution for error detection.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqa/featnet.hpp"
#include "aqa/lstm.hpp"
#include "aqa/score.hpp"

namespace aqa {

// Intermediate score for clip c of N when the final score is s_F:
// s(c) = (c/N) * s_F, a linear accumulation in time.
inline double intermediate_label(std::size_t c, std::size_t n, double final_score) {
    if (c < 1 || c > n)
        throw std::invalid_argument("intermediate_label: clip index " +
                                    std::to_string(c) + " out of range 1.." +
                                    std::to_string(n));
    return (double(c) / double(n)) * final_score;
}

enum class TrainMode { final_label, incremental_label };

struct TrainSchedule {
    TrainMode mode = TrainMode::final_label;
    std::size_t iterations = 10000;
    double learning_rate = 0.0001;
    std::size_t finetune_iterations = 2000;   // incremental mode only
    double finetune_learning_rate = 0.00001;  // 0.1x by default
    std::uint64_t seed = 1;
    std::size_t log_every = 10;

    static TrainSchedule final_default() { return TrainSchedule{}; }

    static TrainSchedule incremental_default() {
        TrainSchedule s;
        s.mode = TrainMode::incremental_label;
        s.iterations = 1000;
        s.finetune_iterations = 2000;
        return s;
    }
};

struct SeqScorerConfig {
    std::size_t feature_dim = 64;
    std::size_t hidden = 32;
    std::size_t lstm_layers = 1;   // 2 available for ablation
    bool shared_lstm = false;      // default: two parallel LSTMs, one per score
    bool constant_difficulty_target = false;  // incremental: diff target fixed at s_F
};

// One training sample: per-clip feature vectors plus labels.
struct SeqSample {
    std::vector<Tensor> feats;
    ScoreLabel label;
    std::string id;
};

struct ScoreEvolution {
    std::vector<std::size_t> clip;   // 1-based
    std::vector<double> exec;        // cumulative predicted execution per clip
    std::vector<double> diff;
    double final_exec = 0.0;
    double final_diff = 0.0;

    std::size_t size() const { return clip.size(); }
};

struct SeqScorer {
    SeqScorerConfig config;
    std::vector<LstmParams> exec_lstm;  // stack, size == lstm_layers
    std::vector<LstmParams> diff_lstm;  // empty when shared_lstm
    FcLayer exec_head;                  // H -> 1
    FcLayer diff_head;
    double exec_scale = 1.0;  // dataset max used to normalize targets to [0,1]
    double diff_scale = 1.0;
    CombineRule rule = CombineRule::product;

    static SeqScorer init(const SeqScorerConfig& cfg, std::uint64_t seed) {
        SeqScorer s;
        s.config = cfg;
        Rng rng(seed);
        auto make_stack = [&] {
            std::vector<LstmParams> stack;
            std::size_t in = cfg.feature_dim;
            for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
                stack.push_back(LstmParams::init(in, cfg.hidden, rng));
                in = cfg.hidden;
            }
            return stack;
        };
        auto make_head = [&] {
            FcLayer h;
            h.weight = Tensor({1, cfg.hidden});
            h.bias = Tensor({1});
            init_uniform_glorot(h.weight, cfg.hidden, 1, rng);
            return h;
        };
        s.exec_lstm = make_stack();
        if (!cfg.shared_lstm) s.diff_lstm = make_stack();
        s.exec_head = make_head();
        s.diff_head = make_head();
        return s;
    }
};

namespace detail {

struct StackCache {
    std::vector<LstmSequence> layers;  // per stack layer
};

inline StackCache stack_forward(const std::vector<LstmParams>& stack,
                                const std::vector<Tensor>& inputs) {
    StackCache cache;
    const std::vector<Tensor>* in = &inputs;
    for (const LstmParams& p : stack) {
        cache.layers.push_back(lstm_forward(p, *in));
        in = &cache.layers.back().hidden;
    }
    return cache;
}

// dh_top[t] = dL/d(top hidden state at step t). Accumulates parameter
// grads into `grads` (parallel to the stack).
inline void stack_backward(const std::vector<LstmParams>& stack, const StackCache& cache,
                           std::vector<Tensor> dh_top, std::vector<LstmGrads>& grads) {
    for (std::size_t l = stack.size(); l-- > 0;) {
        LstmGrads g = lstm_backward(stack[l], cache.layers[l], dh_top);
        for (std::size_t i = 0; i < g.wx.size(); ++i) grads[l].wx[i] += g.wx[i];
        for (std::size_t i = 0; i < g.wh.size(); ++i) grads[l].wh[i] += g.wh[i];
        for (std::size_t i = 0; i < g.b.size(); ++i) grads[l].b[i] += g.b[i];
        dh_top = std::move(g.inputs);
    }
}

struct HeadOut {
    StackCache cache;
    std::vector<double> preds;  // one per step, normalized scale
};

inline HeadOut head_forward(const std::vector<LstmParams>& stack, const FcLayer& head,
                            const std::vector<Tensor>& feats) {
    HeadOut out;
    out.cache = stack_forward(stack, feats);
    for (const Tensor& h : out.cache.layers.back().hidden)
        out.preds.push_back(fc_forward(h, head)[0]);
    return out;
}

}  // namespace detail

struct TrainResult {
    SeqScorer scorer;
    std::vector<std::pair<std::size_t, double>> loss_trace;  // (iteration, loss)
};

namespace detail {

// One SGD step on a single sample. `per_step_targets` is empty for
// final-label (loss at last step only) or length N for incremental.
inline double train_step(SeqScorer& s, const SeqSample& sample, double lr,
                         bool incremental) {
    const std::size_t N = sample.feats.size();
    const double exec_t = sample.label.execution / s.exec_scale;
    const double diff_t = sample.label.difficulty / s.diff_scale;

    double total_loss = 0.0;

    auto run_head = [&](std::vector<LstmParams>& stack, FcLayer& head, double target,
                        bool constant_target) {
        HeadOut out = head_forward(stack, head, sample.feats);
        std::vector<Tensor> dh(N, Tensor({s.config.hidden}));
        FcGrads head_g{Tensor({s.config.hidden}), Tensor(head.weight.shape),
                       Tensor({1})};
        head_g.weight.fill(0.0);
        head_g.bias.fill(0.0);
        for (std::size_t t = 0; t < N; ++t) {
            double step_target;
            if (!incremental) {
                if (t + 1 != N) continue;
                step_target = target;
            } else {
                step_target = constant_target
                                  ? target
                                  : intermediate_label(t + 1, N, target);
            }
            const double d = out.preds[t] - step_target;
            total_loss += 0.5 * d * d;
            const Tensor& h = out.cache.layers.back().hidden[t];
            // d(loss)/d(head params) and d(loss)/dh_t
            for (std::size_t j = 0; j < s.config.hidden; ++j) {
                head_g.weight.data[j] += d * h[j];
                dh[t][j] += d * head.weight.data[j];
            }
            head_g.bias[0] += d;
        }
        std::vector<LstmGrads> grads;
        for (const LstmParams& p : stack) grads.push_back(LstmGrads::zeros(p));
        stack_backward(stack, out.cache, std::move(dh), grads);
        for (std::size_t l = 0; l < stack.size(); ++l) {
            sgd_step(stack[l].wx, grads[l].wx, lr, "lstm" + std::to_string(l) + ".wx");
            sgd_step(stack[l].wh, grads[l].wh, lr, "lstm" + std::to_string(l) + ".wh");
            sgd_step(stack[l].b, grads[l].b, lr, "lstm" + std::to_string(l) + ".b");
        }
        sgd_step(head.weight, head_g.weight, lr, "head.weight");
        sgd_step(head.bias, head_g.bias, lr, "head.bias");
    };

    if (s.config.shared_lstm) {
        // Shared stack: run exec head (updates stack), then diff head.
        run_head(s.exec_lstm, s.exec_head, exec_t, false);
        run_head(s.exec_lstm, s.diff_head, diff_t,
                 incremental && s.config.constant_difficulty_target);
    } else {
        run_head(s.exec_lstm, s.exec_head, exec_t, false);
        run_head(s.diff_lstm, s.diff_head, diff_t,
                 incremental && s.config.constant_difficulty_target);
    }
    return total_loss;
}

inline void run_phase(SeqScorer& s, const std::vector<SeqSample>& dataset,
                      std::size_t iterations, double lr, bool incremental, Rng& rng,
                      std::size_t log_every, std::size_t iter_offset,
                      std::vector<std::pair<std::size_t, double>>& trace) {
    for (std::size_t it = 0; it < iterations; ++it) {
        const SeqSample& sample = dataset[rng.index(dataset.size())];
        double loss;
        try {
            loss = train_step(s, sample, lr, incremental);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("training aborted at iteration " +
                                     std::to_string(iter_offset + it) + ": " + e.what());
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("training aborted at iteration " +
                                     std::to_string(iter_offset + it) +
                                     ": non-finite loss");
        if (log_every > 0 && it % log_every == 0)
            trace.emplace_back(iter_offset + it, loss);
    }
}

inline void fit_scales(SeqScorer& s, const std::vector<SeqSample>& dataset) {
    double em = 0.0, dm = 0.0;
    for (const SeqSample& x : dataset) {
        em = std::max(em, std::fabs(x.label.execution));
        dm = std::max(dm, std::fabs(x.label.difficulty));
    }
    s.exec_scale = em > 0.0 ? em : 1.0;
    s.diff_scale = dm > 0.0 ? dm : 1.0;
    if (!dataset.empty()) s.rule = dataset.front().label.rule;
}

}  // namespace detail

inline TrainResult train_final_label(const std::vector<SeqSample>& dataset,
                                     SeqScorer scorer, const TrainSchedule& schedule) {
    if (dataset.empty()) throw std::invalid_argument("train_final_label: empty dataset");
    if (schedule.mode != TrainMode::final_label)
        throw std::invalid_argument("train_final_label: schedule mode is not final");
    detail::fit_scales(scorer, dataset);
    TrainResult r{std::move(scorer), {}};
    Rng rng(schedule.seed);
    detail::run_phase(r.scorer, dataset, schedule.iterations, schedule.learning_rate,
                      false, rng, schedule.log_every, 0, r.loss_trace);
    return r;
}

inline TrainResult train_incremental_label(const std::vector<SeqSample>& dataset,
                                           SeqScorer scorer,
                                           const TrainSchedule& schedule) {
    if (dataset.empty())
        throw std::invalid_argument("train_incremental_label: empty dataset");
    if (schedule.mode != TrainMode::incremental_label)
        throw std::invalid_argument("train_incremental_label: schedule mode is not incremental");
    detail::fit_scales(scorer, dataset);
    TrainResult r{std::move(scorer), {}};
    Rng rng(schedule.seed);
    // Phase 1: per-step intermediate labels.
    detail::run_phase(r.scorer, dataset, schedule.iterations, schedule.learning_rate,
                      true, rng, schedule.log_every, 0, r.loss_trace);
    // Phase 2: final-label fine-tune at the lower rate.
    detail::run_phase(r.scorer, dataset, schedule.finetune_iterations,
                      schedule.finetune_learning_rate, false, rng, schedule.log_every,
                      schedule.iterations, r.loss_trace);
    return r;
}

// Per-clip predictions in original score units. Also usable as the
// feature hook for the SVR-on-LSTM-activations pipeline via
// `final_hidden`.
inline ScoreEvolution predict_evolution(const SeqScorer& s,
                                        const std::vector<Tensor>& feats) {
    detail::HeadOut exec = detail::head_forward(s.exec_lstm, s.exec_head, feats);
    detail::HeadOut diff = detail::head_forward(
        s.config.shared_lstm ? s.exec_lstm : s.diff_lstm, s.diff_head, feats);
    ScoreEvolution ev;
    for (std::size_t t = 0; t < feats.size(); ++t) {
        ev.clip.push_back(t + 1);
        ev.exec.push_back(exec.preds[t] * s.exec_scale);
        ev.diff.push_back(diff.preds[t] * s.diff_scale);
    }
    ev.final_exec = ev.exec.back();
    ev.final_diff = ev.diff.back();
    return ev;
}

// Final-step hidden state(s); input features for the LSTM-SVR pipeline.
// Concatenates exec and diff stacks' final hidden states.
inline Tensor final_hidden(const SeqScorer& s, const std::vector<Tensor>& feats) {
    detail::StackCache ec = detail::stack_forward(s.exec_lstm, feats);
    const Tensor& he = ec.layers.back().hidden.back();
    if (s.config.shared_lstm) return he;
    detail::StackCache dc = detail::stack_forward(s.diff_lstm, feats);
    const Tensor& hd = dc.layers.back().hidden.back();
    Tensor out({he.size() + hd.size()});
    std::copy(he.data.begin(), he.data.end(), out.data.begin());
    std::copy(hd.data.begin(), hd.data.end(), out.data.begin() + long(he.size()));
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: AQTN tensors + manifest.json.
// ---------------------------------------------------------------------------

inline void save_seqscorer(const SeqScorer& s, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json m;
    m["feature_dim"] = s.config.feature_dim;
    m["hidden"] = s.config.hidden;
    m["lstm_layers"] = s.config.lstm_layers;
    m["shared_lstm"] = s.config.shared_lstm;
    m["constant_difficulty_target"] = s.config.constant_difficulty_target;
    m["exec_scale"] = s.exec_scale;
    m["diff_scale"] = s.diff_scale;
    m["rule"] = to_string(s.rule);
    auto save_stack = [&](const std::vector<LstmParams>& stack, const std::string& name) {
        for (std::size_t l = 0; l < stack.size(); ++l) {
            const std::string base = dir + "/" + name + std::to_string(l);
            save_aqtn(stack[l].wx, base + "_wx.aqtn");
            save_aqtn(stack[l].wh, base + "_wh.aqtn");
            save_aqtn(stack[l].b, base + "_b.aqtn");
        }
    };
    save_stack(s.exec_lstm, "exec_lstm");
    save_stack(s.diff_lstm, "diff_lstm");
    save_aqtn(s.exec_head.weight, dir + "/exec_head_w.aqtn");
    save_aqtn(s.exec_head.bias, dir + "/exec_head_b.aqtn");
    save_aqtn(s.diff_head.weight, dir + "/diff_head_w.aqtn");
    save_aqtn(s.diff_head.bias, dir + "/diff_head_b.aqtn");
    std::ofstream os(dir + "/manifest.json");
    os << m.dump(2) << "\n";
}

inline SeqScorer load_seqscorer(const std::string& dir) {
    std::ifstream is(dir + "/manifest.json");
    if (!is) throw std::runtime_error("load_seqscorer: cannot open " + dir);
    nlohmann::json m = nlohmann::json::parse(is);
    SeqScorerConfig cfg;
    cfg.feature_dim = m.at("feature_dim");
    cfg.hidden = m.at("hidden");
    cfg.lstm_layers = m.at("lstm_layers");
    cfg.shared_lstm = m.at("shared_lstm");
    cfg.constant_difficulty_target = m.at("constant_difficulty_target");
    SeqScorer s = SeqScorer::init(cfg, 0);
    s.exec_scale = m.at("exec_scale");
    s.diff_scale = m.at("diff_scale");
    s.rule = combine_rule_from_string(m.at("rule"));
    auto load_stack = [&](std::vector<LstmParams>& stack, const std::string& name) {
        for (std::size_t l = 0; l < stack.size(); ++l) {
            const std::string base = dir + "/" + name + std::to_string(l);
            stack[l].wx = load_aqtn(base + "_wx.aqtn");
            stack[l].wh = load_aqtn(base + "_wh.aqtn");
            stack[l].b = load_aqtn(base + "_b.aqtn");
        }
    };
    load_stack(s.exec_lstm, "exec_lstm");
    load_stack(s.diff_lstm, "diff_lstm");
    s.exec_head.weight = load_aqtn(dir + "/exec_head_w.aqtn");
    s.exec_head.bias = load_aqtn(dir + "/exec_head_b.aqtn");
    s.diff_head.weight = load_aqtn(dir + "/diff_head_w.aqtn");
    s.diff_head.bias = load_aqtn(dir + "/diff_head_b.aqtn");
    return s;
}

}  // namespace aqa

// Experiment driver: dataset generation, pipeline training, evaluation
// protocols, feedback reports, and the stride sweep. One JSON config per
// experiment; flags override config fields. All commands are
// deterministic given (config, seed): CSV outputs are byte-identical
// across reruns (timings go to stderr, never into the files).
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aqa/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aqa;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fixed per-stage seed offsets so stages can be rerun independently.
constexpr std::uint64_t kSeedWarmup = 101;
constexpr std::uint64_t kSeedRegressor = 202;
constexpr std::uint64_t kSeedProtocol = 303;

struct ExperimentConfig {
    json raw;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::string dataset_dir;
    std::string pipeline = "c3d-svr";
    std::string preset;
};

json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw UsageError("config parse error in " + path + ": " + e.what());
    }
}

ExperimentConfig load_config(const std::string& config_path, std::uint64_t* seed_flag,
                             const std::string& out_flag,
                             const std::string& pipeline_flag,
                             const std::string& preset_flag) {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg.raw = load_json(config_path);
    cfg.seed = cfg.raw.value("seed", std::uint64_t(1));
    cfg.out = cfg.raw.value("out", std::string("out"));
    cfg.dataset_dir = cfg.raw.value("dataset_dir", std::string());
    cfg.pipeline = cfg.raw.value("pipeline", std::string("c3d-svr"));
    cfg.preset = cfg.raw.value("preset", std::string());
    if (seed_flag) cfg.seed = *seed_flag;
    if (!out_flag.empty()) cfg.out = out_flag;
    if (!pipeline_flag.empty()) cfg.pipeline = pipeline_flag;
    if (!preset_flag.empty()) cfg.preset = preset_flag;
    return cfg;
}

SynthConfig synth_from_json(const json& j, std::uint64_t default_seed) {
    const std::string kind = j.value("kind", std::string("dive-like"));
    SynthConfig c = SynthConfig::for_kind(event_kind_from_string(kind));
    c.frames = j.value("frames", c.frames);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.clip_len = j.value("clip_len", c.clip_len);
    c.complexity_max = j.value("complexity_max", c.complexity_max);
    c.defect_rate = j.value("defect_rate", c.defect_rate);
    c.max_defects = j.value("max_defects", c.max_defects);
    c.max_deduction = j.value("max_deduction", c.max_deduction);
    c.seed = j.value("seed", default_seed);
    return c;
}

TrainSchedule schedule_from_json(const json& j) {
    const std::string mode = j.value("mode", std::string("final"));
    TrainSchedule s;
    if (mode == "incremental") s = TrainSchedule::incremental_default();
    else if (mode != "final") throw UsageError("schedule.mode must be final or incremental");
    s.iterations = j.value("iterations", s.iterations);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.finetune_iterations = j.value("finetune_iterations", s.finetune_iterations);
    s.finetune_learning_rate = j.value("finetune_learning_rate", s.finetune_learning_rate);
    s.log_every = j.value("log_every", s.log_every);
    return s;
}

FeatNetConfig featnet_from_json(const json& j, const SynthDataset& ds,
                                std::size_t clip_len) {
    std::size_t c1 = 8, c2 = 16, fdim = 64;
    std::size_t crop_h = ds.config.height, crop_w = ds.config.width;
    if (j.contains("featnet")) {
        const json& f = j["featnet"];
        if (f.contains("channels")) {
            c1 = f["channels"].at(0);
            c2 = f["channels"].at(1);
        }
        fdim = f.value("feature_dim", fdim);
        crop_h = f.value("crop_h", crop_h);
        crop_w = f.value("crop_w", crop_w);
    }
    FeatNetConfig cfg;
    using K = FeatLayerCfg::Kind;
    cfg.input_shape = {1, clip_len, crop_h, crop_w};
    cfg.layers = {
        {K::conv3d, c1, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, {}},
        {K::relu, 0, {}, {}, {}, {}},
        {K::maxpool3d, 0, {}, {2, 2, 2}, {}, {2, 2, 2}},
        {K::conv3d, c2, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, {}},
        {K::relu, 0, {}, {}, {}, {}},
        {K::maxpool3d, 0, {}, {2, 2, 2}, {}, {2, 2, 2}},
        {K::fc, fdim, {}, {}, {}, {}},
        {K::relu, 0, {}, {}, {}, {}},
    };
    return cfg;
}

PipelineConfig pipeline_from_config(const ExperimentConfig& cfg,
                                    const SynthDataset& ds) {
    PipelineConfig p;
    p.kind = pipeline_from_string(cfg.pipeline);
    p.clip_len = cfg.raw.value("clip_len", ds.config.clip_len);
    p.stride = cfg.raw.value("stride", p.clip_len);
    p.warmup_iterations = cfg.raw.value("warmup_iterations", std::size_t(400));
    p.warmup_lr = cfg.raw.value("warmup_lr", 0.01);
    p.difficulty_feature = cfg.raw.value("difficulty_feature", false);
    p.per_head_svr = cfg.raw.value("per_head_svr", false);
    p.featnet = featnet_from_json(cfg.raw, ds, p.clip_len);
    if (cfg.raw.contains("schedule")) p.schedule = schedule_from_json(cfg.raw["schedule"]);
    if (cfg.raw.contains("scorer")) {
        const json& s = cfg.raw["scorer"];
        p.scorer.hidden = s.value("hidden", p.scorer.hidden);
        p.scorer.lstm_layers = s.value("lstm_layers", p.scorer.lstm_layers);
        p.scorer.shared_lstm = s.value("shared_lstm", p.scorer.shared_lstm);
        p.scorer.constant_difficulty_target =
            s.value("constant_difficulty_target", p.scorer.constant_difficulty_target);
    }
    if (cfg.raw.contains("grid")) {
        const json& g = cfg.raw["grid"];
        if (g.contains("C_values"))
            p.grid.C_values = g["C_values"].get<std::vector<double>>();
        if (g.contains("epsilon_fractions"))
            p.grid.epsilon_fractions = g["epsilon_fractions"].get<std::vector<double>>();
    }
    return p;
}

SynthDataset load_dataset_checked(const std::string& dir) {
    if (dir.empty()) throw UsageError("no dataset_dir in config");
    try {
        return load_dataset(dir);
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
}

void ensure_writable(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output dir " + dir + ": " + ec.message());
    const std::string probe = dir + "/.probe";
    std::ofstream os(probe);
    if (!os) throw IoError("output dir not writable: " + dir);
    os.close();
    fs::remove(probe);
}

// Feature extraction with an already-built (frozen) feature network.
void extract_all(Pipeline& p, const SynthDataset& ds) {
    p.clip_feats.clear();
    p.avg_feats.clear();
    for (const ClipSequence& seq : p.segment_all(ds)) {
        ClipFeatures f = extract_features(p.featnet, seq);
        p.avg_feats.push_back(aggregate_average(f, p.cfg.featnet.norm));
        p.clip_feats.push_back(std::move(f.features));
    }
}

template <typename Fn>
auto numeric_guard(Fn&& fn) {
    try {
        return fn();
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        if (msg.find("non-finite") != std::string::npos ||
            msg.find("aborted") != std::string::npos)
            throw NumericError(msg);
        throw;
    }
}

void write_result_csv_zeroed(ResultTable table, const std::string& path) {
    long long total = 0;
    for (ResultRow& r : table.rows) {
        total += r.wall_ms;
        r.wall_ms = 0;  // timings stay out of the deliverable for determinism
    }
    write_result_csv(table, path);
    std::cerr << path << ": " << table.rows.size() << " rows, " << total
              << " ms total\n";
}

// ---------------------------------------------------------------------------
// A trained-model directory: featnet + regressors + model.json.
// ---------------------------------------------------------------------------

struct ModelBundle {
    PipelineKind kind = PipelineKind::c3d_svr;
    Pipeline pipeline;
    SeqScorer scorer;            // LSTM pipelines
    SvrModel svr_overall;        // c3d-svr
    SvrModel svr_exec, svr_diff; // c3d-lstm-svr
    bool difficulty_feature = false;
    std::string dataset_dir;
    json meta;
};

ModelBundle load_model(const std::string& dir) {
    std::ifstream is(dir + "/model.json");
    if (!is) throw IoError("cannot open model: " + dir + "/model.json");
    ModelBundle m;
    m.meta = json::parse(is);
    m.kind = pipeline_from_string(m.meta.at("pipeline"));
    m.dataset_dir = m.meta.value("dataset_dir", std::string());
    m.difficulty_feature = m.meta.value("difficulty_feature", false);
    try {
        m.pipeline.featnet = load_featnet(dir + "/featnet");
        if (m.kind != PipelineKind::c3d_svr)
            m.scorer = load_seqscorer(dir + "/seqscorer");
        if (m.kind == PipelineKind::c3d_svr)
            m.svr_overall = load_svr(dir + "/svr_overall");
        if (m.kind == PipelineKind::c3d_lstm_svr) {
            m.svr_exec = load_svr(dir + "/svr_exec");
            m.svr_diff = load_svr(dir + "/svr_diff");
        }
    } catch (const std::exception& e) {
        throw IoError(std::string("model load failed: ") + e.what());
    }
    m.pipeline.cfg.kind = m.kind;
    m.pipeline.cfg.featnet = m.pipeline.featnet.config;
    m.pipeline.cfg.clip_len = m.meta.value("clip_len", std::size_t(16));
    m.pipeline.cfg.stride = m.meta.value("stride", m.pipeline.cfg.clip_len);
    m.pipeline.cfg.difficulty_feature = m.difficulty_feature;
    if (m.meta.contains("schedule")) {
        m.pipeline.cfg.schedule = schedule_from_json(m.meta["schedule"]);
    }
    m.pipeline.cfg.scorer.hidden = m.meta.value("hidden", m.pipeline.cfg.scorer.hidden);
    m.pipeline.cfg.scorer.lstm_layers =
        m.meta.value("lstm_layers", m.pipeline.cfg.scorer.lstm_layers);
    m.pipeline.cfg.scorer.shared_lstm =
        m.meta.value("shared_lstm", m.pipeline.cfg.scorer.shared_lstm);
    m.pipeline.cfg.warmup_iterations = 0;  // frozen
    return m;
}

// Predictions from the persisted regressors (no retraining).
Predictions predict_with_model(const ModelBundle& m, const SynthDataset& ds,
                               const std::vector<std::size_t>& ids) {
    Predictions out;
    const CombineRule rule = ds.samples.front().labels.rule;
    for (std::size_t id : ids) {
        if (m.kind == PipelineKind::c3d_svr) {
            const double p = predict_svr(m.svr_overall, m.pipeline.svr_features(ds, id));
            out.exec.push_back(p);
            out.diff.push_back(p);
            out.overall.push_back(p);
        } else if (m.kind == PipelineKind::c3d_lstm) {
            ScoreEvolution ev = predict_evolution(m.scorer, m.pipeline.clip_feats[id]);
            out.exec.push_back(ev.final_exec);
            out.diff.push_back(ev.final_diff);
            out.overall.push_back(combine_score(ev.final_exec, ev.final_diff, rule));
        } else {
            Tensor h = final_hidden(m.scorer, m.pipeline.clip_feats[id]);
            std::vector<double> x(h.data.begin(), h.data.end());
            if (m.difficulty_feature) x.push_back(ds.samples[id].labels.difficulty);
            const double e = predict_svr(m.svr_exec, x);
            const double d = predict_svr(m.svr_diff, x);
            out.exec.push_back(e);
            out.diff.push_back(d);
            out.overall.push_back(combine_score(e, d, rule));
        }
    }
    return out;
}

void write_pred_true_csv(const SynthDataset& ds, const std::vector<std::size_t>& ids,
                         const Predictions& p, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "sample_id,true_overall,predicted_overall\n";
    char buf[128];
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n",
                      ds.samples[ids[i]].id.c_str(), ds.samples[ids[i]].labels.overall,
                      p.overall[i]);
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int cmd_generate(const ExperimentConfig& cfg) {
    SynthConfig synth = synth_from_json(cfg.raw.value("dataset", json::object()), cfg.seed);
    std::size_t n = cfg.raw.value("dataset", json::object()).value("n", std::size_t(0));
    std::size_t train = cfg.raw.value("dataset", json::object()).value("train", std::size_t(0));
    if (!cfg.preset.empty()) {
        SplitPreset p = split_preset(cfg.preset);
        n = p.total;
        train = p.train;
        synth.kind = cfg.preset == "unlv-vault" ? EventKind::vault_like
                                                : EventKind::dive_like;
        synth.frames = synth.kind == EventKind::vault_like ? 100 : 151;
    }
    if (n < 2) throw UsageError("dataset.n must be >= 2 (or pass --preset)");
    ensure_writable(cfg.out);
    SynthDataset ds = numeric_guard([&] { return generate_dataset(n, synth, train); });
    save_dataset(ds, cfg.out);
    if (!fs::exists(cfg.out + "/manifest.json"))
        throw IoError("failed to write " + cfg.out + "/manifest.json");
    std::cerr << "generated " << n << " samples (" << ds.train_ids.size() << "/"
              << ds.test_ids.size() << " split) in " << cfg.out << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    SynthDataset ds = load_dataset_checked(cfg.dataset_dir);
    ensure_writable(cfg.out);
    Pipeline pipe;
    pipe.cfg = pipeline_from_config(cfg, ds);

    numeric_guard([&] { pipe.prepare(ds, ds.train_ids, cfg.seed + kSeedWarmup); return 0; });
    save_featnet(pipe.featnet, cfg.out + "/featnet");

    json meta;
    meta["pipeline"] = to_string(pipe.cfg.kind);
    meta["seed"] = cfg.seed;
    meta["dataset_dir"] = cfg.dataset_dir;
    meta["clip_len"] = pipe.cfg.clip_len;
    meta["stride"] = pipe.cfg.stride;
    meta["difficulty_feature"] = pipe.cfg.difficulty_feature;
    meta["hidden"] = pipe.cfg.scorer.hidden;
    meta["lstm_layers"] = pipe.cfg.scorer.lstm_layers;
    meta["shared_lstm"] = pipe.cfg.scorer.shared_lstm;
    if (cfg.raw.contains("schedule")) meta["schedule"] = cfg.raw["schedule"];

    std::vector<std::pair<std::size_t, double>> trace;
    const std::uint64_t rseed = cfg.seed + kSeedRegressor;
    if (pipe.cfg.kind == PipelineKind::c3d_svr) {
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        for (std::size_t id : ds.train_ids) {
            X.push_back(pipe.svr_features(ds, id));
            y.push_back(ds.samples[id].labels.overall);
        }
        SvrModel m = numeric_guard([&] { return pipe.fit_svr_grid(X, y, rseed); });
        save_svr(m, cfg.out + "/svr_overall");
    } else {
        TrainResult r = numeric_guard([&] { return pipe.train_lstm(ds, ds.train_ids, rseed); });
        trace = r.loss_trace;
        save_seqscorer(r.scorer, cfg.out + "/seqscorer");
        if (pipe.cfg.kind == PipelineKind::c3d_lstm_svr) {
            std::vector<std::vector<double>> X;
            std::vector<double> ye, yd;
            for (std::size_t id : ds.train_ids) {
                Tensor h = final_hidden(r.scorer, pipe.clip_feats[id]);
                std::vector<double> x(h.data.begin(), h.data.end());
                if (pipe.cfg.difficulty_feature)
                    x.push_back(ds.samples[id].labels.difficulty);
                X.push_back(std::move(x));
                ye.push_back(ds.samples[id].labels.execution);
                yd.push_back(ds.samples[id].labels.difficulty);
            }
            save_svr(numeric_guard([&] { return pipe.fit_svr_grid(X, ye, rseed); }),
                     cfg.out + "/svr_exec");
            save_svr(numeric_guard([&] { return pipe.fit_svr_grid(X, yd, rseed + 1); }),
                     cfg.out + "/svr_diff");
        }
    }

    {
        std::ofstream os(cfg.out + "/loss_trace.csv");
        os << "iteration,loss\n";
        char buf[64];
        for (const auto& [it, loss] : trace) {
            std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", it, loss);
            os << buf;
        }
    }
    {
        std::ofstream os(cfg.out + "/model.json");
        os << meta.dump(2) << "\n";
    }

    // Score the freshly trained model on its own training split.
    ModelBundle bundle = load_model(cfg.out);
    bundle.pipeline.cfg = pipe.cfg;
    bundle.pipeline.clip_feats = pipe.clip_feats;
    bundle.pipeline.avg_feats = pipe.avg_feats;
    FrameworkFn fn = [&](const SynthDataset& d, const std::vector<std::size_t>&,
                         const std::vector<std::size_t>& test, std::uint64_t) {
        return predict_with_model(bundle, d, test);
    };
    ResultTable t;
    t.rows.push_back(evaluate_once(ds, fn, to_string(pipe.cfg.kind), "train-split",
                                   ds.train_ids, ds.train_ids, cfg.seed));
    write_result_csv_zeroed(t, cfg.out + "/train_results.csv");
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& model_dir) {
    ModelBundle m = load_model(model_dir);
    const std::string ds_dir =
        !cfg.dataset_dir.empty() ? cfg.dataset_dir : m.dataset_dir;
    SynthDataset ds = load_dataset_checked(ds_dir);
    ensure_writable(cfg.out);
    extract_all(m.pipeline, ds);

    // Plot-ready pairs from the persisted regressors.
    const std::string plot_split = cfg.raw.value("plot_split", std::string("test"));
    const std::vector<std::size_t>& plot_ids =
        plot_split == "train" ? ds.train_ids : ds.test_ids;
    Predictions pred = predict_with_model(m, ds, plot_ids);
    write_pred_true_csv(ds, plot_ids, pred, cfg.out + "/pred_true.csv");

    // Repeated-random-split protocol, retraining the regressor per repeat
    // on top of the frozen feature network.
    const std::size_t repeats = cfg.raw.value("repeats", std::size_t(5));
    const std::size_t tr = cfg.raw.value("split_train", ds.train_ids.size());
    const std::size_t te = cfg.raw.value("split_test", ds.test_ids.size());
    SplitPlan plan = SplitPlan::make(repeats, tr, te, cfg.seed + kSeedProtocol);
    ResultTable table = numeric_guard([&] {
        return run_protocol(ds, m.pipeline.as_framework(), to_string(m.kind), plan,
                            cfg.preset.empty() ? "random" : cfg.preset);
    });
    write_result_csv_zeroed(table, cfg.out + "/results.csv");
    write_summary_csv(summarize(table), cfg.out + "/summary.csv");
    return 0;
}

int cmd_feedback(const ExperimentConfig& cfg, const std::string& model_dir,
                 const std::string& sample_id) {
    ModelBundle m = load_model(model_dir);
    if (m.kind == PipelineKind::c3d_svr)
        throw UsageError(
            "feedback needs a score evolution; the c3d-svr pipeline predicts a "
            "single score per video and cannot detect errors — train c3d-lstm or "
            "c3d-lstm-svr instead");
    const std::string ds_dir =
        !cfg.dataset_dir.empty() ? cfg.dataset_dir : m.dataset_dir;
    SynthDataset ds = load_dataset_checked(ds_dir);

    std::size_t idx = ds.samples.size();
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (ds.samples[i].id == sample_id) idx = i;
    if (idx == ds.samples.size())
        throw UsageError("sample id not found in dataset: " + sample_id);

    ensure_writable(cfg.out);
    extract_all(m.pipeline, ds);
    ScoreEvolution ev = predict_evolution(m.scorer, m.pipeline.clip_feats[idx]);
    FeedbackReport report = detect_errors(ev, sample_id);
    {
        std::ofstream os(cfg.out + "/" + sample_id + "_feedback.json");
        os << feedback_json(report).dump(2) << "\n";
    }
    {
        std::ofstream os(cfg.out + "/" + sample_id + "_feedback.txt");
        os << feedback_text(report);
    }
    std::cout << feedback_text(report);
    return 0;
}

int cmd_sweep_stride(const ExperimentConfig& cfg) {
    SynthDataset ds = load_dataset_checked(cfg.dataset_dir);
    ensure_writable(cfg.out);
    std::vector<std::size_t> strides =
        cfg.raw.value("strides", std::vector<std::size_t>{4, 8, 16});
    ResultTable table;
    for (std::size_t stride : strides) {
        ExperimentConfig c = cfg;
        c.raw["stride"] = stride;
        Pipeline pipe;
        pipe.cfg = pipeline_from_config(c, ds);
        numeric_guard([&] {
            pipe.prepare(ds, ds.train_ids, cfg.seed + kSeedWarmup);
            return 0;
        });
        table.rows.push_back(evaluate_once(
            ds, pipe.as_framework(), to_string(pipe.cfg.kind),
            "stride-" + std::to_string(stride), ds.train_ids, ds.test_ids,
            cfg.seed + kSeedRegressor));
    }
    write_result_csv_zeroed(table, cfg.out + "/stride_sweep.csv");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"action-quality assessment experiments"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path, out_flag, pipeline_flag, preset_flag, model_dir,
        sample_id;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "experiment config JSON");
    app.add_option("--seed", seed_flag, "master seed (overrides config)")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--out", out_flag, "output directory (overrides config)");
    app.add_option("--pipeline", pipeline_flag, "c3d-svr | c3d-lstm | c3d-lstm-svr");
    app.add_option("--preset", preset_flag, "mit-dive | unlv-dive | unlv-vault");

    CLI::App* gen = app.add_subcommand("generate", "generate a synthetic dataset");
    CLI::App* train = app.add_subcommand("train", "train a pipeline");
    CLI::App* eval = app.add_subcommand("eval", "run the evaluation protocol");
    eval->add_option("--model", model_dir, "trained model directory")->required();
    CLI::App* fb = app.add_subcommand("feedback", "per-sample error report");
    fb->add_option("--model", model_dir, "trained model directory")->required();
    fb->add_option("--sample", sample_id, "sample id")->required();
    CLI::App* sweep = app.add_subcommand("sweep-stride", "stride sensitivity sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg = load_config(config_path, seed_set ? &seed_flag : nullptr,
                                           out_flag, pipeline_flag, preset_flag);
        if (gen->parsed()) return cmd_generate(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (eval->parsed()) return cmd_eval(cfg, model_dir);
        if (fb->parsed()) return cmd_feedback(cfg, model_dir, sample_id);
        if (sweep->parsed()) return cmd_sweep_stride(cfg);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

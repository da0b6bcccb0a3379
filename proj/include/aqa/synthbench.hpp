#pragma once

// Procedural synthetic event generator. A bright performer blob falls
// through the frame along a trajectory with k oscillation cycles (the
// difficulty proxy). Injected defects perturb the trajectory and add a
// localized noise burst ("splash") inside their clip, with amplitude
// proportional to the score deduction. Labels follow the Olympic rules:
// product of execution and difficulty for dive-like events, sum for
// vault-like.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqa/score.hpp"
#include "aqa/tensor.hpp"
#include "aqa/videoclips.hpp"

namespace aqa {

inline double difficulty_table(std::size_t k, EventKind kind) {
    return kind == EventKind::dive_like ? 2.0 + 0.3 * double(k) : 4.0 + 0.4 * double(k);
}

inline double exec_max_for(EventKind kind) {
    return kind == EventKind::dive_like ? 30.0 : 10.0;
}

inline double round_to_half(double v) { return std::round(v * 2.0) / 2.0; }

struct EventSpec {
    EventKind kind = EventKind::dive_like;
    std::size_t complexity = 0;  // oscillation cycles k
    std::vector<Defect> defects;
    double base_execution = 30.0;
    std::size_t channels = 1;
    std::size_t frames = 151;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t clip_len = 16;
    std::uint64_t seed = 1;
    std::string id = "sample";

    double execution() const {
        double e = base_execution;
        for (const Defect& d : defects) e -= d.deduction;
        return round_to_half(std::clamp(e, 0.0, exec_max_for(kind)));
    }

    ScoreLabel label() const {
        const CombineRule rule =
            kind == EventKind::dive_like ? CombineRule::product : CombineRule::sum;
        return ScoreLabel::make(execution(), difficulty_table(complexity, kind), rule);
    }
};

inline VideoSample generate_event(const EventSpec& spec) {
    const std::size_t n_clips = clip_count(spec.frames, spec.clip_len, spec.clip_len);
    for (const Defect& d : spec.defects)
        if (d.clip < 1 || d.clip > n_clips)
            throw std::invalid_argument("generate_event: defect clip " +
                                        std::to_string(d.clip) + " beyond clip count " +
                                        std::to_string(n_clips));

    Rng rng(spec.seed);
    const std::size_t C = spec.channels, T = spec.frames, H = spec.height,
                      W = spec.width;
    const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double amp = double(W) / 4.0;
    const double sigma = 2.0;

    // Per-frame trajectory perturbation and splash amplitude from defects.
    std::vector<double> kink(T, 0.0), splash(T, 0.0);
    for (const Defect& d : spec.defects) {
        const double kink_dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const std::size_t t0 = (d.clip - 1) * spec.clip_len;
        const std::size_t t1 = std::min(T, t0 + spec.clip_len);
        for (std::size_t t = t0; t < t1; ++t) {
            kink[t] += kink_dir * 0.8 * d.deduction;
            splash[t] += 0.08 * d.deduction;
        }
    }

    VideoSample sample;
    sample.id = spec.id;
    sample.kind = spec.kind;
    sample.labels = spec.label();
    sample.defects = spec.defects;
    sample.frames = Tensor({C, T, H, W});
    for (std::size_t t = 0; t < T; ++t) {
        const double progress = T > 1 ? double(t) / double(T - 1) : 0.0;
        const double cx = double(W) / 2.0 +
                          amp * std::sin(2.0 * 3.14159265358979323846 *
                                             double(spec.complexity) * progress +
                                         phase) +
                          kink[t];
        const double cy = progress * double(H - 1);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t w = 0; w < W; ++w) {
                    const double dx = double(w) - cx;
                    const double dy = double(h) - cy;
                    double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                    if (splash[t] > 0.0) v += splash[t] * rng.uniform();
                    sample.frames.at4(c, t, h, w) = v;
                }
    }
    return sample;
}

// The perfect-information oracle: scores straight from the manifest.
inline ScoreLabel oracle_score(const EventSpec& spec) { return spec.label(); }

struct SplitPreset {
    std::string name;
    std::size_t total = 0;
    std::size_t train = 0;
    std::size_t test = 0;
};

inline SplitPreset split_preset(const std::string& name) {
    if (name == "mit-dive") return {name, 159, 100, 59};
    if (name == "unlv-dive") return {name, 370, 300, 70};
    if (name == "unlv-vault") return {name, 176, 120, 56};
    throw std::invalid_argument("unknown split preset: " + name);
}

struct SynthConfig {
    EventKind kind = EventKind::dive_like;
    std::size_t complexity_max = 8;        // k sampled uniform in [0, complexity_max]
    double defect_rate = 0.6;              // probability a sample carries defects
    std::size_t max_defects = 2;
    double max_deduction = 6.0;            // deductions: multiples of 0.5 in [0.5, max]
    std::size_t frames = 151;              // 100 for vault-like by convention
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t clip_len = 16;
    std::uint64_t seed = 1;

    static SynthConfig for_kind(EventKind kind) {
        SynthConfig c;
        c.kind = kind;
        if (kind == EventKind::vault_like) c.frames = 100;
        return c;
    }
};

struct SynthDataset {
    std::vector<EventSpec> specs;
    std::vector<VideoSample> samples;
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> test_ids;
    SynthConfig config;
};

inline EventSpec sample_spec(const SynthConfig& cfg, std::size_t index, Rng& rng) {
    EventSpec spec;
    spec.kind = cfg.kind;
    spec.frames = cfg.frames;
    spec.height = cfg.height;
    spec.width = cfg.width;
    spec.clip_len = cfg.clip_len;
    spec.base_execution = exec_max_for(cfg.kind);
    spec.complexity = rng.index(cfg.complexity_max + 1);
    spec.seed = rng.next_u64();
    spec.id = "s" + std::to_string(index);
    const std::size_t n_clips = clip_count(cfg.frames, cfg.clip_len, cfg.clip_len);
    if (rng.uniform() < cfg.defect_rate) {
        const std::size_t count = 1 + rng.index(cfg.max_defects);
        for (std::size_t i = 0; i < count; ++i) {
            Defect d;
            d.clip = 1 + rng.index(n_clips);
            const std::size_t steps = std::size_t(cfg.max_deduction / 0.5);
            d.deduction = 0.5 * double(1 + rng.index(steps));
            spec.defects.push_back(d);
        }
    }
    return spec;
}

inline SynthDataset generate_dataset(std::size_t n, const SynthConfig& cfg,
                                     std::size_t train_size = 0) {
    if (n < 2) throw std::invalid_argument("generate_dataset: need n >= 2");
    SynthDataset ds;
    ds.config = cfg;
    Rng rng(cfg.seed);
    for (std::size_t i = 0; i < n; ++i) {
        ds.specs.push_back(sample_spec(cfg, i, rng));
        ds.samples.push_back(generate_event(ds.specs.back()));
    }
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    rng.shuffle(ids);
    if (train_size == 0) train_size = (n * 2) / 3;
    if (train_size >= n)
        throw std::invalid_argument("generate_dataset: train size >= dataset size");
    ds.train_ids.assign(ids.begin(), ids.begin() + long(train_size));
    ds.test_ids.assign(ids.begin() + long(train_size), ids.end());
    return ds;
}

// ---------------------------------------------------------------------------
// Persistence: one AQTN video + JSON sidecar per sample, plus manifest.json.
// ---------------------------------------------------------------------------

inline nlohmann::json sidecar_json(const VideoSample& s) {
    nlohmann::json j;
    j["id"] = s.id;
    j["event_kind"] = to_string(s.kind);
    j["execution"] = s.labels.execution;
    j["difficulty"] = s.labels.difficulty;
    j["overall"] = s.labels.overall;
    nlohmann::json defects = nlohmann::json::array();
    for (const Defect& d : s.defects)
        defects.push_back({{"clip", d.clip}, {"deduction", d.deduction}});
    j["defect_list"] = defects;
    return j;
}

inline void save_dataset(const SynthDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const VideoSample& s : ds.samples) {
        save_aqtn(s.frames, dir + "/" + s.id + ".aqtn");
        std::ofstream os(dir + "/" + s.id + ".json");
        os << sidecar_json(s).dump(2) << "\n";
    }
    nlohmann::json m;
    m["kind"] = to_string(ds.config.kind);
    m["complexity_max"] = ds.config.complexity_max;
    m["defect_rate"] = ds.config.defect_rate;
    m["max_defects"] = ds.config.max_defects;
    m["max_deduction"] = ds.config.max_deduction;
    m["frames"] = ds.config.frames;
    m["height"] = ds.config.height;
    m["width"] = ds.config.width;
    m["clip_len"] = ds.config.clip_len;
    m["seed"] = ds.config.seed;
    m["train_ids"] = ds.train_ids;
    m["test_ids"] = ds.test_ids;
    nlohmann::json specs = nlohmann::json::array();
    for (const EventSpec& sp : ds.specs) {
        nlohmann::json js;
        js["id"] = sp.id;
        js["complexity"] = sp.complexity;
        js["seed"] = sp.seed;
        js["base_execution"] = sp.base_execution;
        nlohmann::json defects = nlohmann::json::array();
        for (const Defect& d : sp.defects)
            defects.push_back({{"clip", d.clip}, {"deduction", d.deduction}});
        js["defects"] = defects;
        specs.push_back(js);
    }
    m["specs"] = specs;
    std::ofstream os(dir + "/manifest.json");
    os << m.dump(2) << "\n";
}

inline SynthDataset load_dataset(const std::string& dir) {
    std::ifstream is(dir + "/manifest.json");
    if (!is) throw std::runtime_error("load_dataset: cannot open " + dir + "/manifest.json");
    nlohmann::json m = nlohmann::json::parse(is);
    SynthDataset ds;
    ds.config.kind = event_kind_from_string(m.at("kind"));
    ds.config.complexity_max = m.at("complexity_max");
    ds.config.defect_rate = m.at("defect_rate");
    ds.config.max_defects = m.at("max_defects");
    ds.config.max_deduction = m.at("max_deduction");
    ds.config.frames = m.at("frames");
    ds.config.height = m.at("height");
    ds.config.width = m.at("width");
    ds.config.clip_len = m.at("clip_len");
    ds.config.seed = m.at("seed");
    ds.train_ids = m.at("train_ids").get<std::vector<std::size_t>>();
    ds.test_ids = m.at("test_ids").get<std::vector<std::size_t>>();
    for (const auto& js : m.at("specs")) {
        EventSpec sp;
        sp.kind = ds.config.kind;
        sp.frames = ds.config.frames;
        sp.height = ds.config.height;
        sp.width = ds.config.width;
        sp.clip_len = ds.config.clip_len;
        sp.id = js.at("id");
        sp.complexity = js.at("complexity");
        sp.seed = js.at("seed");
        sp.base_execution = js.at("base_execution");
        for (const auto& jd : js.at("defects"))
            sp.defects.push_back({jd.at("clip"), jd.at("deduction")});
        ds.specs.push_back(sp);

        VideoSample s;
        s.id = sp.id;
        s.kind = sp.kind;
        s.frames = load_aqtn(dir + "/" + sp.id + ".aqtn");
        s.labels = sp.label();
        s.defects = sp.defects;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace aqa

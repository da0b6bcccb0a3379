#pragma once

// Error detection from score evolution: clips where the predicted
// cumulative score drops are flagged as errors, ranked by magnitude.
// A perfect action is assumed to accumulate score non-decreasingly.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqa/seqscore.hpp"

namespace aqa {

struct ScoreDelta {
    std::size_t clip = 0;  // 1-based index of the clip ending the transition
    double delta = 0.0;
};

struct FeedbackReport {
    std::string sample_id;
    ScoreEvolution evolution;
    std::vector<ScoreDelta> drops;  // delta < 0, sorted by |delta| descending
    std::vector<ScoreDelta> gains;  // delta > 0, in clip order
    std::optional<std::size_t> largest_drop_clip;
};

// |delta| below this is numerical noise, classified as neither drop nor gain.
inline constexpr double kDeltaEpsilon = 1e-9;

// Deltas are taken on the execution-score evolution (the quality signal).
inline FeedbackReport detect_errors(const ScoreEvolution& evolution,
                                    const std::string& sample_id = "") {
    if (evolution.size() < 2)
        throw std::invalid_argument("detect_errors: evolution needs >= 2 clips");
    FeedbackReport report;
    report.sample_id = sample_id;
    report.evolution = evolution;
    for (std::size_t c = 1; c < evolution.size(); ++c) {
        const double delta = evolution.exec[c] - evolution.exec[c - 1];
        if (delta < -kDeltaEpsilon)
            report.drops.push_back({evolution.clip[c], delta});
        else if (delta > kDeltaEpsilon)
            report.gains.push_back({evolution.clip[c], delta});
    }
    std::stable_sort(report.drops.begin(), report.drops.end(),
                     [](const ScoreDelta& a, const ScoreDelta& b) {
                         return std::fabs(a.delta) > std::fabs(b.delta);
                     });
    if (!report.drops.empty()) report.largest_drop_clip = report.drops.front().clip;
    return report;
}

struct LocalizationResult {
    double accuracy = 0.0;     // fraction localized within tolerance
    std::size_t evaluated = 0;
    std::size_t excluded = 0;  // samples without exactly one defect
};

// Fraction of single-defect samples whose largest predicted drop lands
// within +/- tolerance clips of the true defect clip.
inline LocalizationResult localization_accuracy(
    const std::vector<FeedbackReport>& reports,
    const std::vector<std::vector<std::size_t>>& truth_defect_clips,
    std::size_t tolerance) {
    if (reports.size() != truth_defect_clips.size())
        throw std::invalid_argument("localization_accuracy: size mismatch");
    LocalizationResult res;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (truth_defect_clips[i].size() != 1) {
            ++res.excluded;
            continue;
        }
        ++res.evaluated;
        if (!reports[i].largest_drop_clip) continue;
        const long guess = long(*reports[i].largest_drop_clip);
        const long truth = long(truth_defect_clips[i][0]);
        if (std::labs(guess - truth) <= long(tolerance)) ++hits;
    }
    res.accuracy = res.evaluated ? double(hits) / double(res.evaluated) : 0.0;
    return res;
}

// ---------------------------------------------------------------------------
// Report output: JSON and a plain-text table.
// ---------------------------------------------------------------------------

inline nlohmann::json feedback_json(const FeedbackReport& r) {
    nlohmann::json j;
    j["sample_id"] = r.sample_id;
    j["evolution"] = {{"clip", r.evolution.clip},
                      {"exec", r.evolution.exec},
                      {"diff", r.evolution.diff}};
    auto dump = [](const std::vector<ScoreDelta>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (const ScoreDelta& d : v)
            arr.push_back({{"clip", d.clip}, {"delta", d.delta}});
        return arr;
    };
    j["drops"] = dump(r.drops);
    j["gains"] = dump(r.gains);
    if (r.largest_drop_clip)
        j["largest_drop_clip"] = *r.largest_drop_clip;
    else
        j["largest_drop_clip"] = nullptr;
    return j;
}

inline std::string feedback_text(const FeedbackReport& r) {
    std::string out = "sample " + r.sample_id + "\nclip  delta       class\n";
    char buf[96];
    for (std::size_t c = 1; c < r.evolution.size(); ++c) {
        const double delta = r.evolution.exec[c] - r.evolution.exec[c - 1];
        const char* cls = delta < -kDeltaEpsilon ? "drop"
                          : delta > kDeltaEpsilon ? "gain"
                                                  : "flat";
        std::snprintf(buf, sizeof(buf), "%4zu  %+10.4f  %s\n", r.evolution.clip[c],
                      delta, cls);
        out += buf;
    }
    if (r.largest_drop_clip)
        out += "largest drop at clip " + std::to_string(*r.largest_drop_clip) + "\n";
    else
        out += "no drops detected\n";
    return out;
}

}  // namespace aqa

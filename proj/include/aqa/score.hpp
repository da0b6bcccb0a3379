#pragma once

// Score labels and the overall-score combination rules: diving-style
// product (execution x difficulty) and vault-style sum.

#include <cmath>
#include <stdexcept>
#include <string>

namespace aqa {

enum class CombineRule { product, sum };

inline std::string to_string(CombineRule r) {
    return r == CombineRule::product ? "product" : "sum";
}

inline CombineRule combine_rule_from_string(const std::string& s) {
    if (s == "product") return CombineRule::product;
    if (s == "sum") return CombineRule::sum;
    throw std::invalid_argument("unknown combine rule: " + s);
}

inline double combine_score(double exec, double diff, CombineRule rule) {
    return rule == CombineRule::product ? exec * diff : exec + diff;
}

struct ScoreLabel {
    double execution = 0.0;
    double difficulty = 0.0;
    double overall = 0.0;
    CombineRule rule = CombineRule::product;

    static ScoreLabel make(double exec, double diff, CombineRule rule) {
        return ScoreLabel{exec, diff, combine_score(exec, diff, rule), rule};
    }

    bool consistent() const {
        return overall == combine_score(execution, difficulty, rule);
    }
};

enum class EventKind { dive_like, vault_like };

inline std::string to_string(EventKind k) {
    return k == EventKind::dive_like ? "dive-like" : "vault-like";
}

inline EventKind event_kind_from_string(const std::string& s) {
    if (s == "dive-like") return EventKind::dive_like;
    if (s == "vault-like") return EventKind::vault_like;
    throw std::invalid_argument("unknown event kind: " + s);
}

}  // namespace aqa

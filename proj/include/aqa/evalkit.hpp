#pragma once

// Spearman rank correlation with fractional-rank tie handling, the
// repeated random-split experiment protocol, and CSV result tables.

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aqa/synthbench.hpp"

namespace aqa {

// Fractional (average) ranks, 1-based.
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (double(i + 1) + double(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

// Pearson correlation on average ranks. Undefined (nullopt) for n < 2 or
// zero rank variance on either side; never silently coerced to 0.
inline std::optional<double> spearman_rho(const std::vector<double>& pred,
                                          const std::vector<double>& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("spearman_rho: length mismatch");
    const std::size_t n = pred.size();
    if (n < 2) return std::nullopt;
    const std::vector<double> ra = fractional_ranks(pred);
    const std::vector<double> rb = fractional_ranks(truth);
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= double(n);
    mb /= double(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

struct SplitPlan {
    std::size_t repeats = 6;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::vector<std::uint64_t> seeds;  // one per repeat

    static SplitPlan make(std::size_t repeats, std::size_t train_size,
                          std::size_t test_size, std::uint64_t master_seed) {
        SplitPlan p{repeats, train_size, test_size, {}};
        for (std::size_t i = 0; i < repeats; ++i)
            p.seeds.push_back(master_seed + 1000003 * (i + 1));
        return p;
    }
};

struct ResultRow {
    std::string framework;
    std::string preset;
    std::uint64_t seed = 0;
    std::optional<double> rho_exec;
    std::optional<double> rho_diff;
    std::optional<double> rho_overall;
    long long wall_ms = 0;
    std::string status = "ok";
};

struct ResultTable {
    std::vector<ResultRow> rows;
};

// Per-test-sample predictions from one trained framework instance.
struct Predictions {
    std::vector<double> exec;
    std::vector<double> diff;
    std::vector<double> overall;
};

// Trains on train_ids and predicts on test_ids, deterministic given seed.
using FrameworkFn = std::function<Predictions(
    const SynthDataset& dataset, const std::vector<std::size_t>& train_ids,
    const std::vector<std::size_t>& test_ids, std::uint64_t seed)>;

inline std::string format_rho(const std::optional<double>& r) {
    if (!r) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *r);
    return buf;
}

inline ResultRow evaluate_once(const SynthDataset& ds, const FrameworkFn& framework,
                               const std::string& framework_id,
                               const std::string& preset,
                               const std::vector<std::size_t>& train_ids,
                               const std::vector<std::size_t>& test_ids,
                               std::uint64_t seed) {
    ResultRow row;
    row.framework = framework_id;
    row.preset = preset;
    row.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        Predictions p = framework(ds, train_ids, test_ids, seed);
        std::vector<double> te, td, to;
        for (std::size_t id : test_ids) {
            te.push_back(ds.samples[id].labels.execution);
            td.push_back(ds.samples[id].labels.difficulty);
            to.push_back(ds.samples[id].labels.overall);
        }
        row.rho_exec = spearman_rho(p.exec, te);
        row.rho_diff = spearman_rho(p.diff, td);
        row.rho_overall = spearman_rho(p.overall, to);
    } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
    }
    row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return row;
}

// Repeated random splits; a repeat failure is recorded in its row and the
// protocol continues. Rows come out in seed order.
inline ResultTable run_protocol(const SynthDataset& ds, const FrameworkFn& framework,
                                const std::string& framework_id,
                                const SplitPlan& plan,
                                const std::string& preset = "random") {
    if (plan.train_size + plan.test_size > ds.samples.size())
        throw std::invalid_argument("run_protocol: split larger than dataset");
    if (plan.seeds.size() != plan.repeats)
        throw std::invalid_argument("run_protocol: seed count != repeats");
    ResultTable table;
    for (std::size_t r = 0; r < plan.repeats; ++r) {
        const std::uint64_t seed = plan.seeds[r];
        std::vector<std::size_t> ids(ds.samples.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        Rng rng(seed);
        rng.shuffle(ids);
        std::vector<std::size_t> train(ids.begin(), ids.begin() + long(plan.train_size));
        std::vector<std::size_t> test(ids.begin() + long(plan.train_size),
                                      ids.begin() + long(plan.train_size + plan.test_size));
        table.rows.push_back(
            evaluate_once(ds, framework, framework_id, preset, train, test, seed));
    }
    return table;
}

struct SummaryRow {
    std::string framework;
    std::string preset;
    std::size_t count = 0;  // defined entries
    double mean_exec = 0.0, std_exec = 0.0;
    double mean_diff = 0.0, std_diff = 0.0;
    double mean_overall = 0.0, std_overall = 0.0;
};

// Arithmetic mean and population std over defined entries per
// (framework, preset) group. Groups with no defined rho are omitted.
inline std::vector<SummaryRow> summarize(const ResultTable& table) {
    std::map<std::pair<std::string, std::string>, std::vector<const ResultRow*>> groups;
    for (const ResultRow& r : table.rows)
        groups[{r.framework, r.preset}].push_back(&r);

    std::vector<SummaryRow> out;
    for (const auto& [key, rows] : groups) {
        auto stats = [&](auto getter) -> std::tuple<double, double, std::size_t> {
            std::vector<double> v;
            for (const ResultRow* r : rows)
                if (auto x = getter(*r)) v.push_back(*x);
            if (v.empty()) return {0.0, 0.0, 0};
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= double(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            var /= double(v.size());
            return {mean, std::sqrt(var), v.size()};
        };
        auto [me, se, ne] = stats([](const ResultRow& r) { return r.rho_exec; });
        auto [md, sd, nd] = stats([](const ResultRow& r) { return r.rho_diff; });
        auto [mo, so, no] = stats([](const ResultRow& r) { return r.rho_overall; });
        if (ne == 0 && nd == 0 && no == 0) continue;
        SummaryRow s;
        s.framework = key.first;
        s.preset = key.second;
        s.count = std::max({ne, nd, no});
        s.mean_exec = me;
        s.std_exec = se;
        s.mean_diff = md;
        s.std_diff = sd;
        s.mean_overall = mo;
        s.std_overall = so;
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV output. Fixed headers so downstream tooling can rely on them.
// ---------------------------------------------------------------------------

inline void write_result_csv(const ResultTable& table, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_result_csv: cannot open " + path);
    os << "framework,preset,seed,rho_exec,rho_diff,rho_overall,wall_ms,status\n";
    for (const ResultRow& r : table.rows)
        os << r.framework << "," << r.preset << "," << r.seed << ","
           << format_rho(r.rho_exec) << "," << format_rho(r.rho_diff) << ","
           << format_rho(r.rho_overall) << "," << r.wall_ms << "," << r.status << "\n";
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows,
                              const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_summary_csv: cannot open " + path);
    os << "framework,preset,count,mean_exec,std_exec,mean_diff,std_diff,"
          "mean_overall,std_overall\n";
    char buf[256];
    for (const SummaryRow& s : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      s.framework.c_str(), s.preset.c_str(), s.count, s.mean_exec,
                      s.std_exec, s.mean_diff, s.std_diff, s.mean_overall,
                      s.std_overall);
        os << buf;
    }
}

}  // namespace aqa

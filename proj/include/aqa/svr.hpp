#pragma once

// Epsilon-insensitive support vector regression. The dual is solved in
// the beta = alpha - alpha* parameterization by pairwise coordinate
// ascent with working-set selection by maximal KKT violation:
//
//   max_beta  sum_i y_i b_i - eps sum_i |b_i| - 1/2 b' K b
//   s.t.      sum_i b_i = 0,  |b_i| <= C
//
// Pair updates transfer mass between two coordinates, which keeps the
// equality constraint exact; the 1-D subproblem is piecewise quadratic
// (breakpoints where a beta crosses zero) and is solved exactly.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqa/tensor.hpp"

namespace aqa {

struct KernelSpec {
    enum class Kind { linear, rbf } kind = Kind::rbf;
    double gamma = 1.0;  // rbf only

    static KernelSpec linear() { return {Kind::linear, 0.0}; }
    static KernelSpec rbf(double gamma) { return {Kind::rbf, gamma}; }
};

inline double kernel_eval(const KernelSpec& spec, const std::vector<double>& x,
                          const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("kernel_eval: dimension mismatch " +
                                    std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()));
    if (spec.kind == KernelSpec::Kind::linear) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
        return acc;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sq += d * d;
    }
    return std::exp(-spec.gamma * sq);
}

struct SvrProblem {
    std::vector<std::vector<double>> features;  // n x d
    std::vector<double> targets;                // n
    double C = 100.0;
    double epsilon = 0.01;
    KernelSpec kernel;
    double tol = 1e-3;
    std::size_t max_passes = 100000;
};

struct SvrModel {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> coefficients;  // beta_i, same order
    double bias = 0.0;
    KernelSpec kernel;
    double C = 100.0;
    double epsilon = 0.01;
    bool converged = true;
    double dual_objective = 0.0;
};

inline double predict_svr(const SvrModel& m, const std::vector<double>& x) {
    double f = m.bias;
    for (std::size_t i = 0; i < m.support_vectors.size(); ++i)
        f += m.coefficients[i] * kernel_eval(m.kernel, m.support_vectors[i], x);
    return f;
}

namespace detail {

inline double svr_dual_objective(const std::vector<double>& beta,
                                 const std::vector<std::vector<double>>& K,
                                 const std::vector<double>& y, double eps) {
    const std::size_t n = beta.size();
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        obj += y[i] * beta[i] - eps * std::fabs(beta[i]);
        for (std::size_t j = 0; j < n; ++j) obj -= 0.5 * beta[i] * K[i][j] * beta[j];
    }
    return obj;
}

}  // namespace detail

inline SvrModel train_svr(const SvrProblem& prob) {
    const std::size_t n = prob.features.size();
    if (n == 0 || prob.targets.size() != n)
        throw std::invalid_argument("train_svr: empty problem or target count mismatch");
    if (prob.C <= 0.0 || prob.epsilon < 0.0)
        throw std::invalid_argument("train_svr: invalid hyperparameters");

    // Precompute the kernel matrix.
    std::vector<std::vector<double>> K(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = kernel_eval(prob.kernel, prob.features[i], prob.features[j]);
            if (!std::isfinite(v))
                throw std::invalid_argument("train_svr: non-finite kernel value");
            K[i][j] = K[j][i] = v;
        }

    const double C = prob.C, eps = prob.epsilon;
    const std::vector<double>& y = prob.targets;
    std::vector<double> beta(n, 0.0);
    std::vector<double> kb(n, 0.0);  // (K beta)_i, maintained incrementally

    // Derivative of the objective wrt increasing / decreasing beta_i,
    // with the epsilon branch taken on the side of the move.
    auto up_val = [&](std::size_t i) {
        return y[i] - kb[i] + (beta[i] < 0.0 ? eps : -eps);
    };
    auto down_val = [&](std::size_t i) {
        return y[i] - kb[i] + (beta[i] > 0.0 ? -eps : eps);
    };

    // Exact objective change when moving delta from j to i.
    auto delta_gain = [&](std::size_t i, std::size_t j, double d) {
        const double eta = K[i][i] + K[j][j] - 2.0 * K[i][j];
        double gain = (y[i] - kb[i]) * d - (y[j] - kb[j]) * d - 0.5 * d * d * eta;
        gain -= eps * (std::fabs(beta[i] + d) - std::fabs(beta[i]));
        gain -= eps * (std::fabs(beta[j] - d) - std::fabs(beta[j]));
        return gain;
    };

    bool converged = false;
    std::size_t pass = 0;
    for (; pass < prob.max_passes; ++pass) {
        // Working pair: most violating up/down coordinates.
        double best_up = -1e300, best_down = 1e300;
        std::size_t bi = n, bj = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (beta[i] < C - 1e-14 && up_val(i) > best_up) {
                best_up = up_val(i);
                bi = i;
            }
            if (beta[i] > -C + 1e-14 && down_val(i) < best_down) {
                best_down = down_val(i);
                bj = i;
            }
        }
        if (bi == n || bj == n || bi == bj || best_up - best_down < prob.tol) {
            converged = best_up - best_down < prob.tol || bi == n || bj == n || bi == bj;
            break;
        }

        const double d_max = std::min(C - beta[bi], beta[bj] + C);
        const double eta = K[bi][bi] + K[bj][bj] - 2.0 * K[bi][bj];

        // Candidate deltas: segment breakpoints (beta crossing zero), the
        // box limit, and per-segment stationary points.
        std::vector<double> candidates{d_max};
        if (beta[bi] < 0.0 && -beta[bi] < d_max) candidates.push_back(-beta[bi]);
        if (beta[bj] > 0.0 && beta[bj] < d_max) candidates.push_back(beta[bj]);
        if (eta > 1e-14) {
            std::vector<double> seg_edges{0.0};
            if (beta[bi] < 0.0) seg_edges.push_back(-beta[bi]);
            if (beta[bj] > 0.0) seg_edges.push_back(beta[bj]);
            seg_edges.push_back(d_max);
            std::sort(seg_edges.begin(), seg_edges.end());
            for (std::size_t s = 0; s + 1 < seg_edges.size(); ++s) {
                const double lo = seg_edges[s], hi = seg_edges[s + 1];
                if (hi <= lo) continue;
                const double mid = 0.5 * (lo + hi);
                const double sign_i = (beta[bi] + mid) >= 0.0 ? 1.0 : -1.0;
                const double sign_j = (beta[bj] - mid) >= 0.0 ? 1.0 : -1.0;
                // slope(d) = (y_i - kb_i) - (y_j - kb_j)
                //            - eps*sign_i + eps*sign_j - d*eta
                const double slope0 = (y[bi] - kb[bi]) - (y[bj] - kb[bj]) -
                                      eps * sign_i + eps * sign_j;
                const double d_star = slope0 / eta;
                if (d_star > lo && d_star < hi) candidates.push_back(d_star);
            }
        }

        double best_d = 0.0, best_gain = 0.0;
        for (double d : candidates) {
            if (d <= 0.0 || d > d_max) continue;
            const double g = delta_gain(bi, bj, d);
            if (g > best_gain) {
                best_gain = g;
                best_d = d;
            }
        }
        if (best_d <= 0.0) {
            converged = true;  // no improving step along the most violating pair
            break;
        }

        beta[bi] += best_d;
        beta[bj] -= best_d;
        for (std::size_t i = 0; i < n; ++i)
            kb[i] += best_d * (K[i][bi] - K[i][bj]);
    }

    // Bias: average over free support vectors; otherwise midpoint of the
    // feasible interval implied by the KKT inequalities.
    double b = 0.0;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(beta[i]);
        if (a > 1e-9 && a < C - 1e-9) {
            b += y[i] - kb[i] + (beta[i] > 0.0 ? -eps : eps);
            ++free_count;
        }
    }
    if (free_count > 0) {
        b /= double(free_count);
    } else {
        double lo = -1e300, hi = 1e300;
        for (std::size_t i = 0; i < n; ++i) {
            if (beta[i] > C - 1e-9) {
                hi = std::min(hi, y[i] - kb[i] - eps);
            } else if (beta[i] < -C + 1e-9) {
                lo = std::max(lo, y[i] - kb[i] + eps);
            } else {
                lo = std::max(lo, y[i] - kb[i] - eps);
                hi = std::min(hi, y[i] - kb[i] + eps);
            }
        }
        if (lo > hi) std::swap(lo, hi);
        b = 0.5 * (lo + hi);
    }

    SvrModel model;
    model.kernel = prob.kernel;
    model.C = C;
    model.epsilon = eps;
    model.bias = b;
    model.converged = converged || pass < prob.max_passes;
    if (pass >= prob.max_passes) model.converged = false;
    model.dual_objective = detail::svr_dual_objective(beta, K, y, eps);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::fabs(beta[i]) > 1e-12) {
            model.support_vectors.push_back(prob.features[i]);
            model.coefficients.push_back(beta[i]);
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Persistence: JSON scalars + AQTN support-vector matrix.
// ---------------------------------------------------------------------------

inline void save_svr(const SvrModel& m, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json j;
    j["kernel"] = m.kernel.kind == KernelSpec::Kind::linear ? "linear" : "rbf";
    j["gamma"] = m.kernel.gamma;
    j["C"] = m.C;
    j["epsilon"] = m.epsilon;
    j["b"] = m.bias;
    j["coefficients"] = m.coefficients;
    j["converged"] = m.converged;
    std::ofstream os(dir + "/svr.json");
    os << j.dump(2) << "\n";
    const std::size_t n = m.support_vectors.size();
    const std::size_t d = n ? m.support_vectors[0].size() : 1;
    Tensor sv({std::max<std::size_t>(n, 1), d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) sv.data[i * d + k] = m.support_vectors[i][k];
    save_aqtn(sv, dir + "/support_vectors.aqtn");
}

inline SvrModel load_svr(const std::string& dir) {
    std::ifstream is(dir + "/svr.json");
    if (!is) throw std::runtime_error("load_svr: cannot open " + dir + "/svr.json");
    nlohmann::json j = nlohmann::json::parse(is);
    SvrModel m;
    m.kernel.kind = j.at("kernel") == "linear" ? KernelSpec::Kind::linear
                                               : KernelSpec::Kind::rbf;
    m.kernel.gamma = j.at("gamma");
    m.C = j.at("C");
    m.epsilon = j.at("epsilon");
    m.bias = j.at("b");
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    m.converged = j.at("converged");
    Tensor sv = load_aqtn(dir + "/support_vectors.aqtn");
    const std::size_t d = sv.shape[1];
    for (std::size_t i = 0; i < m.coefficients.size(); ++i)
        m.support_vectors.emplace_back(sv.data.begin() + long(i * d),
                                       sv.data.begin() + long((i + 1) * d));
    return m;
}

}  // namespace aqa

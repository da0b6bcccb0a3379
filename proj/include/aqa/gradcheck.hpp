#pragma once

// Central-finite-difference gradient checking against analytic gradients.
// Relative error: |a - n| / max(|a|, |n|, 1e-12).

#include <functional>
#include <string>
#include <vector>

#include "aqa/tensor.hpp"

namespace aqa {

struct GradCheckReport {
    std::string layer_id;
    double max_rel_error = 0.0;
    std::vector<double> per_param_error;  // one entry per checked parameter

    bool passes(double tol) const { return max_rel_error < tol; }
};

inline double rel_error(double analytic, double numeric) {
    const double denom =
        std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
    return std::fabs(analytic - numeric) / denom;
}

// `params` are the tensors the loss depends on; `loss` recomputes the scalar
// from their current values; `analytic` holds one gradient tensor per param,
// in the same order.
inline GradCheckReport grad_check(const std::string& layer_id,
                                  const std::vector<Tensor*>& params,
                                  const std::function<double()>& loss,
                                  const std::vector<Tensor>& analytic,
                                  double h = 1e-5) {
    if (params.size() != analytic.size())
        throw std::invalid_argument("grad_check: param/gradient count mismatch");
    GradCheckReport report{layer_id, 0.0, {}};
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = *params[p];
        if (!t.same_shape(analytic[p]))
            throw std::invalid_argument("grad_check: gradient shape mismatch at param " +
                                        std::to_string(p));
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t.data[i];
            t.data[i] = orig + h;
            const double lp = loss();
            t.data[i] = orig - h;
            const double lm = loss();
            t.data[i] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double err = rel_error(analytic[p].data[i], numeric);
            report.per_param_error.push_back(err);
            if (err > report.max_rel_error) report.max_rel_error = err;
        }
    }
    return report;
}

}  // namespace aqa

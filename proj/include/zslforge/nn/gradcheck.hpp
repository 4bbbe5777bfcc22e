// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

#include "zslforge/nn/matrix.hpp"

namespace zslforge {

/// A loss evaluation with its analytic gradient. `regime` identifies the
/// piecewise-linear region (activation pattern) the evaluation landed in;
/// smooth losses leave it at zero.
template <class Params>
struct LossEval {
    double value = 0.0;
    Params grad;
    std::uint64_t regime = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_tensor = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0; // coordinates whose +-h probes crossed a kink
    bool passed = true;
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    return std::abs(analytic - numeric) / denom;
}

/// Central finite differences over every parameter coordinate.
/// `loss` maps Params -> LossEval<Params>.
template <class Params, class LossFn>
GradCheckReport finite_diff_check(LossFn&& loss, const Params& params, double tolerance, double h = 1e-5) {
    const LossEval<Params> base = loss(params);
    const auto analytic = tensors(base.grad);
    GradCheckReport report;
    Params probe = params;
    auto views = tensors(probe);
    for (std::size_t k = 0; k < views.size(); ++k) {
        for (std::size_t i = 0; i < views[k].size(); ++i) {
            const double saved = views[k][i];
            views[k][i] = saved + h;
            const LossEval<Params> plus = loss(probe);
            views[k][i] = saved - h;
            const LossEval<Params> minus = loss(probe);
            views[k][i] = saved;
            if (plus.regime != base.regime || minus.regime != base.regime) {
                ++report.skipped;
                continue;
            }
            const double numeric = (plus.value - minus.value) / (2.0 * h);
            const double err = relative_error(analytic[k][i], numeric);
            ++report.checked;
            if (err > report.max_rel_error || std::isnan(err)) {
                report.max_rel_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
                report.worst_tensor = k;
                report.worst_index = i;
                report.worst_analytic = analytic[k][i];
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    return report;
}

} // namespace zslforge

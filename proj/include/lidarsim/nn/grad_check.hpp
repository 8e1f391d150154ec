#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace lidarsim::nn {

/// A block of coordinates to perturb: the live values and where the analytic
/// gradients for them land.
struct GradCheckBlock {
    double* values = nullptr;
    const double* grads = nullptr;
    std::size_t count = 0;
};

/// Central finite-difference check in double precision.
/// `compute_gradients` must (re)compute the analytic gradients for the current
/// values (zeroing stale ones first); `loss` evaluates the scalar alone.
/// Returns max over coordinates of |analytic - numeric| / max(|a|, |n|, 1e-6).
inline double gradient_check(const std::function<double()>& loss,
                             const std::function<void()>& compute_gradients,
                             const std::vector<GradCheckBlock>& blocks,
                             double epsilon = 1e-5) {
    compute_gradients();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(blocks.size());
    for (const auto& b : blocks) analytic.emplace_back(b.grads, b.grads + b.count);

    double max_rel = 0.0;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const auto& b = blocks[bi];
        for (std::size_t i = 0; i < b.count; ++i) {
            const double saved = b.values[i];
            b.values[i] = saved + epsilon;
            const double plus = loss();
            b.values[i] = saved - epsilon;
            const double minus = loss();
            b.values[i] = saved;
            const double numeric = (plus - minus) / (2.0 * epsilon);
            const double a = analytic[bi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace lidarsim::nn

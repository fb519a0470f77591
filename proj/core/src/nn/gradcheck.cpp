#include "urbanrl/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace urbanrl::nn {

GradCheckResult finite_difference_check(
    const std::function<double(std::span<const double>)>& loss,
    std::span<double> params, std::span<const double> analytic_grad,
    double epsilon, std::size_t max_samples, std::uint64_t sample_seed) {
    if (epsilon < 1e-7 || epsilon > 1e-3)
        throw std::invalid_argument("finite_difference_check: epsilon outside [1e-7, 1e-3]");
    if (params.size() != analytic_grad.size())
        throw std::invalid_argument("finite_difference_check: gradient size mismatch");

    std::vector<std::size_t> indices;
    if (params.size() <= max_samples) {
        indices.resize(params.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
    } else {
        // seeded partial Fisher-Yates for a distinct random subset
        indices.resize(params.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        std::mt19937_64 rng(sample_seed);
        for (std::size_t i = 0; i < max_samples; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng() % (indices.size() - i));
            std::swap(indices[i], indices[j]);
        }
        indices.resize(max_samples);
    }

    GradCheckResult res;
    res.checked = indices.size();
    for (std::size_t idx : indices) {
        const double saved = params[idx];
        params[idx] = saved + epsilon;
        const double lp = loss(params);
        params[idx] = saved - epsilon;
        const double lm = loss(params);
        params[idx] = saved;
        const double fd = (lp - lm) / (2.0 * epsilon);
        const double an = analytic_grad[idx];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        const double rel = std::abs(fd - an) / denom;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst_index = idx;
        }
    }
    return res;
}

} // namespace urbanrl::nn

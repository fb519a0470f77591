#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>

namespace urbanrl::nn {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Central-difference comparison of `analytic_grad` against (L(p+eps)-L(p-eps))
/// / (2 eps), element-wise, at double precision. Relative error denominator is
/// max(|fd|, |analytic|, 1e-8). When the parameter vector is larger than
/// `max_samples`, a seeded random subset of indices is checked instead of all
/// of them. Parameters are perturbed in place and restored.
GradCheckResult finite_difference_check(
    const std::function<double(std::span<const double>)>& loss,
    std::span<double> params, std::span<const double> analytic_grad,
    double epsilon,
    std::size_t max_samples = std::numeric_limits<std::size_t>::max(),
    std::uint64_t sample_seed = 0);

} // namespace urbanrl::nn

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace urbanrl::nn {

template <class S>
struct AdamState {
    std::vector<S> m, v;
    long long t = 0;
    S alpha, beta1, beta2, epsilon;

    explicit AdamState(std::size_t n, S alpha_ = S(0.001), S beta1_ = S(0.9),
                       S beta2_ = S(0.999), S epsilon_ = S(1e-8))
        : m(n, S(0)), v(n, S(0)), alpha(alpha_), beta1(beta1_), beta2(beta2_),
          epsilon(epsilon_) {}
};

/// Standard Adam with bias correction. The step counter is incremented before
/// the correction terms are computed. A non-finite gradient rejects the whole
/// update and reports the offending index.
template <class S>
void adam_update(std::span<S> params, std::span<const S> grads, AdamState<S>& st) {
    if (params.size() != grads.size() || params.size() != st.m.size())
        throw std::invalid_argument("adam_update: size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(static_cast<double>(grads[i])))
            throw std::runtime_error("adam_update: non-finite gradient at index " +
                                     std::to_string(i));
    st.t += 1;
    const S b1t = static_cast<S>(std::pow(static_cast<double>(st.beta1), st.t));
    const S b2t = static_cast<S>(std::pow(static_cast<double>(st.beta2), st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (S(1) - st.beta1) * grads[i];
        st.v[i] = st.beta2 * st.v[i] + (S(1) - st.beta2) * grads[i] * grads[i];
        const S mhat = st.m[i] / (S(1) - b1t);
        const S vhat = st.v[i] / (S(1) - b2t);
        params[i] -= st.alpha * mhat / (std::sqrt(vhat) + st.epsilon);
    }
}

} // namespace urbanrl::nn

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "urbanrl/nn/layer_spec.hpp"
#include "urbanrl/nn/tensor.hpp"

namespace urbanrl::nn {

template <class S>
using MatR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Flat parameter vector layout, per layer in declaration order:
//   conv2d : weights as (kh, kw, in_c, filter) row-major, then `filters` biases
//   dense  : weights as (in_dim, out_dim) row-major, then `out_dim` biases
//   lstm   : four gate weight blocks in order (input, forget, cell-candidate,
//            output), each (in_dim + hidden) x hidden column-major — i.e. one
//            column-major (in_dim + hidden) x (4*hidden) matrix — then
//            4*hidden biases in the same gate order.
// Gate inputs are z = [x, h_prev].

/// Per-LSTM-layer (h, c) pair, each batch x hidden.
template <class S>
struct RecurrentState {
    std::vector<MatR<S>> h, c;
};

/// Activations recorded by one forward step, for backpropagation through time.
template <class S>
struct StepCache {
    struct LayerCache {
        MatR<S> input; // conv: im2col patches; dense: X; lstm: Z = [x, h_prev]
        MatR<S> pre;   // conv/dense pre-activation
        MatR<S> gi, gf, gg, go, c_prev, tanh_c; // lstm internals
    };
    std::vector<LayerCache> layers;
    int batch = 0;
};

template <class S>
class Network {
public:
    explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {}

    const NetworkSpec& spec() const { return spec_; }

    RecurrentState<S> zero_state(int batch) const;

    /// One time step for a batch of `input.rows()` items. `input` rows are
    /// flattened (h, w, c) tensors; `aux` rows feed LSTM layers declared with
    /// aux_dim > 0. Updates `state` in place; records into `cache` if given.
    MatR<S> forward_step(const MatR<S>& input, const MatR<S>& aux,
                         std::span<const S> params, RecurrentState<S>& state,
                         StepCache<S>* cache = nullptr) const;

    /// Exact BPTT over a recorded window. `caches` holds the forward records
    /// of steps 0..T-1 in order; `d_out[t]` is the upstream gradient at the
    /// network output for step t. Returns the flat parameter gradient.
    std::vector<S> backprop_window(std::span<const S> params,
                                   const std::vector<StepCache<S>>& caches,
                                   const std::vector<MatR<S>>& d_out) const;

private:
    NetworkSpec spec_;
};

/// Cross-correlation with valid padding plus bias; the standalone form of the
/// convolution used inside Network.
template <class S>
Tensor3<S> conv2d_forward(const Tensor3<S>& input, const ConvGeom& geom,
                          std::span<const S> weights, std::span<const S> biases);

/// Single LSTM cell update: i,f,o = sigmoid(gates), g = tanh(candidate),
/// c' = f*c + i*g, h' = o*tanh(c').
template <class S>
struct LstmStepResult {
    std::vector<S> h, c;
};
template <class S>
LstmStepResult<S> lstm_step(std::span<const S> x, std::span<const S> h,
                            std::span<const S> c, const LstmGeom& geom,
                            std::span<const S> weights, std::span<const S> biases);

/// He-style uniform init for conv/dense, +-1/sqrt(hidden) for LSTM with
/// forget-gate bias 1.0. Deterministic in `seed`.
template <class S>
std::vector<S> init_params(const NetworkSpec& spec, std::uint64_t seed);

inline constexpr const char* kInitScheme = "he-uniform;lstm-uniform-forget1;v1";

extern template class Network<float>;
extern template class Network<double>;
extern template Tensor3<float> conv2d_forward<float>(const Tensor3<float>&, const ConvGeom&, std::span<const float>, std::span<const float>);
extern template Tensor3<double> conv2d_forward<double>(const Tensor3<double>&, const ConvGeom&, std::span<const double>, std::span<const double>);
extern template LstmStepResult<float> lstm_step<float>(std::span<const float>, std::span<const float>, std::span<const float>, const LstmGeom&, std::span<const float>, std::span<const float>);
extern template LstmStepResult<double> lstm_step<double>(std::span<const double>, std::span<const double>, std::span<const double>, const LstmGeom&, std::span<const double>, std::span<const double>);
extern template std::vector<float> init_params<float>(const NetworkSpec&, std::uint64_t);
extern template std::vector<double> init_params<double>(const NetworkSpec&, std::uint64_t);

} // namespace urbanrl::nn

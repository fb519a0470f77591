#include "urbanrl/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace urbanrl::nn {

namespace {

template <class S>
using ColMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// One item: input tensor (h, w, c) row-major -> patch rows (out_h*out_w, K),
// K = kh*kw*c, patch entries in (ki, kj, c) order.
template <class S>
void im2col_item(const S* in, const ConvGeom& g, S* patch) {
    const std::size_t K = static_cast<std::size_t>(g.patch_dim());
    const std::size_t row_len = static_cast<std::size_t>(g.kw) * g.in_c;
    std::size_t row = 0;
    for (int oh = 0; oh < g.out_h(); ++oh) {
        for (int ow = 0; ow < g.out_w(); ++ow, ++row) {
            S* dst = patch + row * K;
            for (int ki = 0; ki < g.kh; ++ki) {
                const S* src = in + (static_cast<std::size_t>(oh * g.sh + ki) * g.in_w +
                                     static_cast<std::size_t>(ow * g.sw)) * g.in_c;
                std::copy(src, src + row_len, dst + static_cast<std::size_t>(ki) * row_len);
            }
        }
    }
}

// Scatter-add transpose of im2col_item.
template <class S>
void col2im_add_item(const S* patch, const ConvGeom& g, S* din) {
    const std::size_t K = static_cast<std::size_t>(g.patch_dim());
    const std::size_t row_len = static_cast<std::size_t>(g.kw) * g.in_c;
    std::size_t row = 0;
    for (int oh = 0; oh < g.out_h(); ++oh) {
        for (int ow = 0; ow < g.out_w(); ++ow, ++row) {
            const S* src = patch + row * K;
            for (int ki = 0; ki < g.kh; ++ki) {
                S* dst = din + (static_cast<std::size_t>(oh * g.sh + ki) * g.in_w +
                                static_cast<std::size_t>(ow * g.sw)) * g.in_c;
                const S* s = src + static_cast<std::size_t>(ki) * row_len;
                for (std::size_t j = 0; j < row_len; ++j) dst[j] += s[j];
            }
        }
    }
}

template <class S>
MatR<S> sigmoid(const MatR<S>& x) {
    return ((-x.array()).exp() + S(1)).inverse().matrix();
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

template <class S>
RecurrentState<S> Network<S>::zero_state(int batch) const {
    RecurrentState<S> st;
    for (const LayerSpec& l : spec_.layers) {
        if (l.kind == LayerKind::Lstm) {
            st.h.push_back(MatR<S>::Zero(batch, l.lstm.hidden));
            st.c.push_back(MatR<S>::Zero(batch, l.lstm.hidden));
        }
    }
    return st;
}

template <class S>
MatR<S> Network<S>::forward_step(const MatR<S>& input, const MatR<S>& aux,
                                 std::span<const S> params,
                                 RecurrentState<S>& state,
                                 StepCache<S>* cache) const {
    const int B = static_cast<int>(input.rows());
    if (input.cols() != spec_.input_dim())
        throw std::invalid_argument("forward_step: input dim " +
                                    std::to_string(input.cols()) + ", expected " +
                                    std::to_string(spec_.input_dim()));
    if (spec_.aux_dim > 0 && (aux.rows() != B || aux.cols() != spec_.aux_dim))
        throw std::invalid_argument("forward_step: aux shape mismatch");
    if (params.size() != spec_.param_count)
        throw std::invalid_argument("forward_step: parameter vector size mismatch");
    std::size_t n_lstm = 0;
    for (const LayerSpec& l : spec_.layers)
        if (l.kind == LayerKind::Lstm) ++n_lstm;
    if (state.h.size() != n_lstm || state.c.size() != n_lstm)
        throw std::invalid_argument("forward_step: recurrent state layer count mismatch");

    if (cache) {
        cache->layers.clear();
        cache->layers.resize(spec_.layers.size());
        cache->batch = B;
    }

    MatR<S> act = input;
    std::size_t lstm_idx = 0;
    for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
        const LayerSpec& L = spec_.layers[li];
        const S* w = params.data() + spec_.offsets[li];
        switch (L.kind) {
        case LayerKind::Conv2d: {
            const ConvGeom& g = L.conv;
            const int oHW = g.out_h() * g.out_w();
            const int K = g.patch_dim();
            const int F = g.filters;
            MatR<S> P(static_cast<Eigen::Index>(B) * oHW, K);
            for (int b = 0; b < B; ++b)
                im2col_item(act.data() + static_cast<std::size_t>(b) * act.cols(), g,
                            P.data() + static_cast<std::size_t>(b) * oHW * K);
            Eigen::Map<const MatR<S>> W(w, K, F);
            Eigen::Map<const RowVec<S>> bias(w + static_cast<std::size_t>(K) * F, F);
            MatR<S> Z(B, oHW * F);
            Eigen::Map<MatR<S>> Zv(Z.data(), static_cast<Eigen::Index>(B) * oHW, F);
            Zv.noalias() = P * W;
            Zv.rowwise() += bias;
            if (cache) {
                cache->layers[li].input = std::move(P);
                cache->layers[li].pre = Z;
            }
            if (g.relu) Z = Z.cwiseMax(S(0));
            act = std::move(Z);
            break;
        }
        case LayerKind::Dense: {
            const DenseGeom& g = L.dense;
            if (act.cols() != g.in_dim)
                throw std::invalid_argument("dense: input dim mismatch");
            Eigen::Map<const MatR<S>> W(w, g.in_dim, g.out_dim);
            Eigen::Map<const RowVec<S>> bias(
                w + static_cast<std::size_t>(g.in_dim) * g.out_dim, g.out_dim);
            MatR<S> Z(B, g.out_dim);
            Z.noalias() = act * W;
            Z.rowwise() += bias;
            if (cache) {
                cache->layers[li].input = std::move(act);
                cache->layers[li].pre = Z;
            }
            if (g.relu) Z = Z.cwiseMax(S(0));
            act = std::move(Z);
            break;
        }
        case LayerKind::Lstm: {
            const LstmGeom& g = L.lstm;
            const int H = g.hidden;
            if (act.cols() + g.aux_dim != g.in_dim)
                throw std::invalid_argument("lstm: input dim mismatch");
            MatR<S> Z(B, g.in_dim + H);
            Z.leftCols(act.cols()) = act;
            if (g.aux_dim > 0) Z.middleCols(act.cols(), g.aux_dim) = aux;
            Z.rightCols(H) = state.h[lstm_idx];
            Eigen::Map<const ColMat<S>> W(w, g.in_dim + H, 4 * H);
            Eigen::Map<const RowVec<S>> bias(
                w + static_cast<std::size_t>(g.in_dim + H) * 4 * H, 4 * H);
            MatR<S> A(B, 4 * H);
            A.noalias() = Z * W;
            A.rowwise() += bias;
            MatR<S> gi = sigmoid<S>(A.leftCols(H));
            MatR<S> gf = sigmoid<S>(A.middleCols(H, H));
            MatR<S> gg = A.middleCols(2 * H, H).array().tanh().matrix();
            MatR<S> go = sigmoid<S>(A.rightCols(H));
            MatR<S> c_new =
                gf.cwiseProduct(state.c[lstm_idx]) + gi.cwiseProduct(gg);
            MatR<S> tanh_c = c_new.array().tanh().matrix();
            MatR<S> h_new = go.cwiseProduct(tanh_c);
            if (cache) {
                auto& cc = cache->layers[li];
                cc.input = std::move(Z);
                cc.gi = std::move(gi);
                cc.gf = std::move(gf);
                cc.gg = std::move(gg);
                cc.go = std::move(go);
                cc.c_prev = state.c[lstm_idx];
                cc.tanh_c = tanh_c;
            }
            state.c[lstm_idx] = std::move(c_new);
            state.h[lstm_idx] = h_new;
            act = std::move(h_new);
            ++lstm_idx;
            break;
        }
        }
    }
    return act;
}

template <class S>
std::vector<S> Network<S>::backprop_window(std::span<const S> params,
                                           const std::vector<StepCache<S>>& caches,
                                           const std::vector<MatR<S>>& d_out) const {
    if (caches.empty() || caches.size() != d_out.size())
        throw std::invalid_argument("backprop: missing recorded activations for window");
    for (const auto& c : caches)
        if (c.layers.size() != spec_.layers.size())
            throw std::invalid_argument("backprop: cache layer count mismatch");
    const int T = static_cast<int>(caches.size());
    const int B = caches[0].batch;

    std::vector<S> grads(spec_.param_count, S(0));
    std::size_t n_lstm = 0;
    for (const LayerSpec& l : spec_.layers)
        if (l.kind == LayerKind::Lstm) ++n_lstm;
    std::vector<MatR<S>> dh_carry(n_lstm), dc_carry(n_lstm);
    {
        std::size_t k = 0;
        for (const LayerSpec& l : spec_.layers)
            if (l.kind == LayerKind::Lstm) {
                dh_carry[k] = MatR<S>::Zero(B, l.lstm.hidden);
                dc_carry[k] = MatR<S>::Zero(B, l.lstm.hidden);
                ++k;
            }
    }

    for (int t = T - 1; t >= 0; --t) {
        if (d_out[t].rows() != B || d_out[t].cols() != spec_.output_dim())
            throw std::invalid_argument("backprop: upstream gradient shape mismatch");
        MatR<S> d = d_out[t];
        std::size_t lstm_idx = n_lstm;
        for (int li = static_cast<int>(spec_.layers.size()) - 1; li >= 0; --li) {
            const LayerSpec& L = spec_.layers[li];
            const S* w = params.data() + spec_.offsets[li];
            S* gw = grads.data() + spec_.offsets[li];
            const auto& cc = caches[t].layers[li];
            switch (L.kind) {
            case LayerKind::Conv2d: {
                const ConvGeom& g = L.conv;
                const int oHW = g.out_h() * g.out_w();
                const int K = g.patch_dim();
                const int F = g.filters;
                MatR<S> dZfull;
                if (g.relu)
                    dZfull = (d.array() * (cc.pre.array() > S(0)).template cast<S>())
                                 .matrix();
                else
                    dZfull = std::move(d);
                Eigen::Map<MatR<S>> dZ(dZfull.data(),
                                       static_cast<Eigen::Index>(B) * oHW, F);
                Eigen::Map<MatR<S>> dW(gw, K, F);
                dW.noalias() += cc.input.transpose() * dZ;
                Eigen::Map<RowVec<S>> db(gw + static_cast<std::size_t>(K) * F, F);
                db += dZ.colwise().sum();
                if (li > 0) {
                    Eigen::Map<const MatR<S>> W(w, K, F);
                    MatR<S> dP(static_cast<Eigen::Index>(B) * oHW, K);
                    dP.noalias() = dZ * W.transpose();
                    MatR<S> din = MatR<S>::Zero(B, L.input_dim());
                    for (int b = 0; b < B; ++b)
                        col2im_add_item(
                            dP.data() + static_cast<std::size_t>(b) * oHW * K, g,
                            din.data() + static_cast<std::size_t>(b) * L.input_dim());
                    d = std::move(din);
                }
                break;
            }
            case LayerKind::Dense: {
                const DenseGeom& g = L.dense;
                MatR<S> dZ;
                if (g.relu)
                    dZ = (d.array() * (cc.pre.array() > S(0)).template cast<S>())
                             .matrix();
                else
                    dZ = std::move(d);
                Eigen::Map<MatR<S>> dW(gw, g.in_dim, g.out_dim);
                dW.noalias() += cc.input.transpose() * dZ;
                Eigen::Map<RowVec<S>> db(
                    gw + static_cast<std::size_t>(g.in_dim) * g.out_dim, g.out_dim);
                db += dZ.colwise().sum();
                if (li > 0) {
                    Eigen::Map<const MatR<S>> W(w, g.in_dim, g.out_dim);
                    d.resize(B, g.in_dim);
                    d.noalias() = dZ * W.transpose();
                }
                break;
            }
            case LayerKind::Lstm: {
                --lstm_idx;
                const LstmGeom& g = L.lstm;
                const int H = g.hidden;
                MatR<S> dh = d + dh_carry[lstm_idx];
                MatR<S> dct =
                    (dc_carry[lstm_idx].array() +
                     dh.array() * cc.go.array() * (S(1) - cc.tanh_c.array().square()))
                        .matrix();
                MatR<S> dA(B, 4 * H);
                dA.leftCols(H) = (dct.array() * cc.gg.array() * cc.gi.array() *
                                  (S(1) - cc.gi.array()))
                                     .matrix();
                dA.middleCols(H, H) = (dct.array() * cc.c_prev.array() *
                                       cc.gf.array() * (S(1) - cc.gf.array()))
                                          .matrix();
                dA.middleCols(2 * H, H) =
                    (dct.array() * cc.gi.array() * (S(1) - cc.gg.array().square()))
                        .matrix();
                dA.rightCols(H) = (dh.array() * cc.tanh_c.array() * cc.go.array() *
                                   (S(1) - cc.go.array()))
                                      .matrix();
                Eigen::Map<ColMat<S>> dW(gw, g.in_dim + H, 4 * H);
                dW.noalias() += cc.input.transpose() * dA;
                Eigen::Map<RowVec<S>> db(
                    gw + static_cast<std::size_t>(g.in_dim + H) * 4 * H, 4 * H);
                db += dA.colwise().sum();
                Eigen::Map<const ColMat<S>> W(w, g.in_dim + H, 4 * H);
                MatR<S> dZ(B, g.in_dim + H);
                dZ.noalias() = dA * W.transpose();
                dc_carry[lstm_idx] = dct.cwiseProduct(cc.gf);
                dh_carry[lstm_idx] = dZ.rightCols(H);
                if (li > 0) d = dZ.leftCols(g.in_dim - g.aux_dim);
                break;
            }
            }
        }
    }
    return grads;
}

template <class S>
Tensor3<S> conv2d_forward(const Tensor3<S>& input, const ConvGeom& geom,
                          std::span<const S> weights, std::span<const S> biases) {
    if (input.channels != geom.in_c)
        throw std::invalid_argument("conv2d_forward: input channels " +
                                    std::to_string(input.channels) +
                                    " do not match kernel in_c " +
                                    std::to_string(geom.in_c));
    if (!input.same_shape(geom.in_h, geom.in_w, geom.in_c))
        throw std::invalid_argument("conv2d_forward: input " + input.shape_str() +
                                    " does not match layer geometry");
    const std::size_t K = static_cast<std::size_t>(geom.patch_dim());
    if (weights.size() != K * geom.filters ||
        biases.size() != static_cast<std::size_t>(geom.filters))
        throw std::invalid_argument("conv2d_forward: parameter size mismatch");

    const int oHW = geom.out_h() * geom.out_w();
    MatR<S> P(oHW, static_cast<int>(K));
    im2col_item(input.data.data(), geom, P.data());
    Eigen::Map<const MatR<S>> W(weights.data(), K, geom.filters);
    Eigen::Map<const RowVec<S>> bias(biases.data(), geom.filters);

    Tensor3<S> out(geom.out_h(), geom.out_w(), geom.filters);
    Eigen::Map<MatR<S>> O(out.data.data(), oHW, geom.filters);
    O.noalias() = P * W;
    O.rowwise() += bias;
    return out;
}

template <class S>
LstmStepResult<S> lstm_step(std::span<const S> x, std::span<const S> h,
                            std::span<const S> c, const LstmGeom& geom,
                            std::span<const S> weights, std::span<const S> biases) {
    const int D = geom.in_dim, H = geom.hidden;
    if (static_cast<int>(x.size()) != D || static_cast<int>(h.size()) != H ||
        static_cast<int>(c.size()) != H)
        throw std::invalid_argument("lstm_step: x/h/c dimension mismatch");
    if (weights.size() != static_cast<std::size_t>(4) * (D + H) * H ||
        biases.size() != static_cast<std::size_t>(4) * H)
        throw std::invalid_argument("lstm_step: parameter size mismatch");

    Eigen::Matrix<S, 1, Eigen::Dynamic> z(D + H);
    for (int j = 0; j < D; ++j) z(j) = x[j];
    for (int j = 0; j < H; ++j) z(D + j) = h[j];
    Eigen::Map<const ColMat<S>> W(weights.data(), D + H, 4 * H);
    Eigen::Map<const RowVec<S>> bias(biases.data(), 4 * H);
    Eigen::Matrix<S, 1, Eigen::Dynamic> a = z * W + bias;

    LstmStepResult<S> out;
    out.h.resize(H);
    out.c.resize(H);
    for (int j = 0; j < H; ++j) {
        const S gi = S(1) / (S(1) + std::exp(-a(j)));
        const S gf = S(1) / (S(1) + std::exp(-a(H + j)));
        const S gg = std::tanh(a(2 * H + j));
        const S go = S(1) / (S(1) + std::exp(-a(3 * H + j)));
        out.c[j] = gf * c[j] + gi * gg;
        out.h[j] = go * std::tanh(out.c[j]);
    }
    return out;
}

template <class S>
std::vector<S> init_params(const NetworkSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<S> p(spec.param_count, S(0));
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& L = spec.layers[li];
        S* w = p.data() + spec.offsets[li];
        const std::size_t nw = L.weight_count();
        double bound = 0;
        switch (L.kind) {
        case LayerKind::Conv2d: bound = std::sqrt(6.0 / L.conv.patch_dim()); break;
        case LayerKind::Dense: bound = std::sqrt(6.0 / L.dense.in_dim); break;
        case LayerKind::Lstm: bound = 1.0 / std::sqrt(double(L.lstm.hidden)); break;
        }
        for (std::size_t j = 0; j < nw; ++j)
            w[j] = static_cast<S>((2.0 * uniform01(rng) - 1.0) * bound);
        if (L.kind == LayerKind::Lstm) {
            // biases zero except forget gate block at 1.0
            const int H = L.lstm.hidden;
            for (int j = 0; j < H; ++j) w[nw + H + j] = S(1);
        }
    }
    return p;
}

template class Network<float>;
template class Network<double>;
template Tensor3<float> conv2d_forward<float>(const Tensor3<float>&, const ConvGeom&, std::span<const float>, std::span<const float>);
template Tensor3<double> conv2d_forward<double>(const Tensor3<double>&, const ConvGeom&, std::span<const double>, std::span<const double>);
template LstmStepResult<float> lstm_step<float>(std::span<const float>, std::span<const float>, std::span<const float>, const LstmGeom&, std::span<const float>, std::span<const float>);
template LstmStepResult<double> lstm_step<double>(std::span<const double>, std::span<const double>, std::span<const double>, const LstmGeom&, std::span<const double>, std::span<const double>);
template std::vector<float> init_params<float>(const NetworkSpec&, std::uint64_t);
template std::vector<double> init_params<double>(const NetworkSpec&, std::uint64_t);

} // namespace urbanrl::nn

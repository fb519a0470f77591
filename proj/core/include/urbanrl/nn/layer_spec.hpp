#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace urbanrl::nn {

enum class LayerKind { Conv2d, Dense, Lstm };

/// Valid-padding cross-correlation geometry. Output size follows
/// floor((in - k) / stride) + 1 in each spatial dimension.
struct ConvGeom {
    int in_h = 0, in_w = 0, in_c = 0;
    int kh = 0, kw = 0;
    int sh = 1, sw = 1;
    int filters = 0;
    bool relu = false;

    int out_h() const { return (in_h - kh) / sh + 1; }
    int out_w() const { return (in_w - kw) / sw + 1; }
    int patch_dim() const { return kh * kw * in_c; }
    int out_dim() const { return out_h() * out_w() * filters; }
};

struct DenseGeom {
    int in_dim = 0, out_dim = 0;
    bool relu = false;
};

/// in_dim counts the full step input, including any auxiliary vector the
/// network concatenates in front of this layer (aux_dim of it).
struct LstmGeom {
    int in_dim = 0;
    int hidden = 0;
    int aux_dim = 0;
};

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    ConvGeom conv{};
    DenseGeom dense{};
    LstmGeom lstm{};

    int input_dim() const;
    int output_dim() const;
    std::size_t weight_count() const;
    std::size_t bias_count() const;
    std::size_t param_count() const { return weight_count() + bias_count(); }

    static LayerSpec conv2d(int in_h, int in_w, int in_c, int kh, int kw,
                            int sh, int sw, int filters, bool relu);
    static LayerSpec fully_connected(int in_dim, int out_dim, bool relu);
    static LayerSpec lstm(int in_dim, int hidden, int aux_dim = 0);
};

/// An ordered stack of layers sharing one flat parameter vector.
/// Layer outputs flow into the next layer's input; an LSTM layer with
/// aux_dim > 0 consumes [previous output, aux vector] as its step input.
struct NetworkSpec {
    std::vector<LayerSpec> layers;
    int input_h = 0, input_w = 0, input_c = 0;
    int aux_dim = 0;
    std::vector<std::size_t> offsets; // start of each layer's params
    std::size_t param_count = 0;

    int input_dim() const { return input_h * input_w * input_c; }
    int output_dim() const { return layers.back().output_dim(); }

    static NetworkSpec chain(int in_h, int in_w, int in_c, int aux_dim,
                             std::vector<LayerSpec> layers);
};

inline int LayerSpec::input_dim() const {
    switch (kind) {
    case LayerKind::Conv2d: return conv.in_h * conv.in_w * conv.in_c;
    case LayerKind::Dense: return dense.in_dim;
    case LayerKind::Lstm: return lstm.in_dim;
    }
    return 0;
}

inline int LayerSpec::output_dim() const {
    switch (kind) {
    case LayerKind::Conv2d: return conv.out_dim();
    case LayerKind::Dense: return dense.out_dim;
    case LayerKind::Lstm: return lstm.hidden;
    }
    return 0;
}

inline std::size_t LayerSpec::weight_count() const {
    switch (kind) {
    case LayerKind::Conv2d:
        return static_cast<std::size_t>(conv.patch_dim()) * conv.filters;
    case LayerKind::Dense:
        return static_cast<std::size_t>(dense.in_dim) * dense.out_dim;
    case LayerKind::Lstm:
        // four gate blocks, each (in_dim + hidden) x hidden
        return 4u * static_cast<std::size_t>(lstm.in_dim + lstm.hidden) * lstm.hidden;
    }
    return 0;
}

inline std::size_t LayerSpec::bias_count() const {
    switch (kind) {
    case LayerKind::Conv2d: return static_cast<std::size_t>(conv.filters);
    case LayerKind::Dense: return static_cast<std::size_t>(dense.out_dim);
    case LayerKind::Lstm: return 4u * static_cast<std::size_t>(lstm.hidden);
    }
    return 0;
}

inline LayerSpec LayerSpec::conv2d(int in_h, int in_w, int in_c, int kh, int kw,
                                   int sh, int sw, int filters, bool relu) {
    if (sh < 1 || sw < 1)
        throw std::invalid_argument("conv2d: stride components must be >= 1");
    if (kh > in_h || kw > in_w)
        throw std::invalid_argument("conv2d: kernel exceeds input (valid padding)");
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.conv = ConvGeom{in_h, in_w, in_c, kh, kw, sh, sw, filters, relu};
    return s;
}

inline LayerSpec LayerSpec::fully_connected(int in_dim, int out_dim, bool relu) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.dense = DenseGeom{in_dim, out_dim, relu};
    return s;
}

inline LayerSpec LayerSpec::lstm(int in_dim, int hidden, int aux_dim) {
    LayerSpec s;
    s.kind = LayerKind::Lstm;
    s.lstm = LstmGeom{in_dim, hidden, aux_dim};
    return s;
}

inline NetworkSpec NetworkSpec::chain(int in_h, int in_w, int in_c, int aux_dim,
                                      std::vector<LayerSpec> layers) {
    if (layers.empty())
        throw std::invalid_argument("NetworkSpec: empty layer list");
    NetworkSpec net;
    net.input_h = in_h;
    net.input_w = in_w;
    net.input_c = in_c;
    net.aux_dim = aux_dim;
    net.layers = std::move(layers);

    int prev_dim = net.input_dim();
    for (const LayerSpec& l : net.layers) {
        int expected = l.input_dim();
        if (l.kind == LayerKind::Lstm && l.lstm.aux_dim > 0) {
            if (l.lstm.aux_dim != aux_dim)
                throw std::invalid_argument(
                    "NetworkSpec: layer aux_dim does not match network aux_dim");
            expected -= l.lstm.aux_dim; // aux arrives from outside the stack
        }
        if (expected != prev_dim)
            throw std::invalid_argument(
                "NetworkSpec: layer input dim " + std::to_string(expected) +
                " does not match previous output dim " + std::to_string(prev_dim));
        prev_dim = l.output_dim();
    }
    net.offsets.resize(net.layers.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        net.offsets[i] = off;
        off += net.layers[i].param_count();
    }
    net.param_count = off;
    return net;
}

} // namespace urbanrl::nn

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace urbanrl::nn {

/// Dense rank-3 array stored row-major in (height, width, channel) order.
template <class S>
struct Tensor3 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<S> data;

    Tensor3() = default;
    Tensor3(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, S(0)) {
        if (h <= 0 || w <= 0 || c <= 0)
            throw std::invalid_argument("Tensor3: non-positive dimension");
    }

    std::size_t size() const { return data.size(); }

    S& at(int h, int w, int c) {
        return data[(static_cast<std::size_t>(h) * width + w) * channels + c];
    }
    S at(int h, int w, int c) const {
        return data[(static_cast<std::size_t>(h) * width + w) * channels + c];
    }

    bool same_shape(int h, int w, int c) const {
        return height == h && width == w && channels == c;
    }

    std::string shape_str() const {
        return std::to_string(height) + "x" + std::to_string(width) + "x" +
               std::to_string(channels);
    }
};

} // namespace urbanrl::nn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sivgan {

/// Shape of a rank-4 tensor in (batch, channels, height, width) order.
/// Lower-rank data (vectors, scalars) uses trailing ones.
struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::int64_t numel() const { return std::int64_t(n) * c * h * w; }
    std::int64_t spatial() const { return std::int64_t(h) * w; }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

inline void check_arg(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

/// Dense rank-4 tensor with contiguous row-major layout (w fastest).
template <typename S>
struct Tensor {
    using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;

    Shape shape{};
    ArrayX data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s) {
        check_arg(s.n >= 1 && s.c >= 1 && s.h >= 1 && s.w >= 1,
                  "tensor: dimensions must be positive, got " + s.str());
        data = ArrayX::Zero(s.numel());
    }

    static Tensor zeros(Shape s) { return Tensor(s); }
    static Tensor full(Shape s, S v) {
        Tensor t(s);
        t.data.setConstant(v);
        return t;
    }

    std::int64_t numel() const { return shape.numel(); }

    std::int64_t index(int n, int c, int y, int x) const {
        return ((std::int64_t(n) * shape.c + c) * shape.h + y) * shape.w + x;
    }
    S& at(int n, int c, int y, int x) { return data[index(n, c, y, x)]; }
    S at(int n, int c, int y, int x) const { return data[index(n, c, y, x)]; }

    /// Per-sample channel-major view: rows = channels, cols = spatial positions.
    auto sample_matrix(int n) {
        using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        return Eigen::Map<Mat>(data.data() + std::int64_t(n) * shape.c * shape.spatial(),
                               shape.c, shape.spatial());
    }
    auto sample_matrix(int n) const {
        using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        return Eigen::Map<const Mat>(data.data() + std::int64_t(n) * shape.c * shape.spatial(),
                                     shape.c, shape.spatial());
    }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.data = data.template cast<T>();
        return out;
    }

    bool all_finite() const { return data.isFinite().all(); }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace sivgan

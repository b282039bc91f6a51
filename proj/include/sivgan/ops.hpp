// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "sivgan/autograd.hpp"

namespace sivgan::ops {

using sivgan::Shape;
using sivgan::Tensor;
using sivgan::Var;

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
    check_arg(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor<S> out = a.value();
    out.data += b.value().data;
    auto pa = a.node();
    auto pb = b.node();
    return make_op<S>(std::move(out), {a, b}, [pa, pb](const Tensor<S>& g) {
        if (pa->requires_grad) pa->accumulate(g);
        if (pb->requires_grad) pb->accumulate(g);
    });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
    check_arg(a.shape() == b.shape(), "sub: shape mismatch");
    Tensor<S> out = a.value();
    out.data -= b.value().data;
    auto pa = a.node();
    auto pb = b.node();
    return make_op<S>(std::move(out), {a, b}, [pa, pb](const Tensor<S>& g) {
        if (pa->requires_grad) pa->accumulate(g);
        if (pb->requires_grad) {
            Tensor<S> gb = g;
            gb.data = -gb.data;
            pb->accumulate(gb);
        }
    });
}

template <typename S>
Var<S> scale(const Var<S>& a, double k) {
    Tensor<S> out = a.value();
    out.data *= S(k);
    auto pa = a.node();
    return make_op<S>(std::move(out), {a}, [pa, k](const Tensor<S>& g) {
        if (!pa->requires_grad) return;
        Tensor<S> ga = g;
        ga.data *= S(k);
        pa->accumulate(ga);
    });
}

template <typename S>
Var<S> leaky_relu(const Var<S>& x, double slope = 0.2) {
    const Tensor<S>& v = x.value();
    Tensor<S> out(v.shape);
    out.data = (v.data >= S(0)).select(v.data, v.data * S(slope));
    auto px = x.node();
    return make_op<S>(std::move(out), {x}, [px, slope](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        Tensor<S> gx(g.shape);
        gx.data = (px->value.data >= S(0)).select(g.data, g.data * S(slope));
        px->accumulate(gx);
    });
}

template <typename S>
Var<S> tanh_op(const Var<S>& x) {
    Tensor<S> out(x.shape());
    out.data = x.value().data.tanh();
    auto px = x.node();
    Tensor<S> y = out;  // captured for the derivative
    return make_op<S>(std::move(out), {x}, [px, y = std::move(y)](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        Tensor<S> gx(g.shape);
        gx.data = g.data * (S(1) - y.data.square());
        px->accumulate(gx);
    });
}

/// Mean over every element, returning a (1,1,1,1) scalar.
template <typename S>
Var<S> mean_all(const Var<S>& x) {
    const auto n = x.shape().numel();
    Tensor<S> out(Shape{1, 1, 1, 1});
    out.data[0] = x.value().data.sum() / S(n);
    auto px = x.node();
    Shape xs = x.shape();
    return make_op<S>(std::move(out), {x}, [px, xs, n](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        px->accumulate(Tensor<S>::full(xs, g.data[0] / S(n)));
    });
}

/// Global average pooling over the spatial grid: (n,c,h,w) -> (n,c,1,1).
template <typename S>
Var<S> global_avg_pool(const Var<S>& x) {
    const Shape s = x.shape();
    const auto hw = s.spatial();
    Tensor<S> out(Shape{s.n, s.c, 1, 1});
    for (int n = 0; n < s.n; ++n)
        out.sample_matrix(n).col(0) = x.value().sample_matrix(n).rowwise().mean();
    auto px = x.node();
    return make_op<S>(std::move(out), {x}, [px, s, hw](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        Tensor<S> gx(s);
        for (int n = 0; n < s.n; ++n)
            gx.sample_matrix(n).colwise() = g.sample_matrix(n).col(0) / S(hw);
        px->accumulate(gx);
    });
}

/// 2x2 stride-2 average pooling with ceil semantics: odd edges average over
/// the in-bounds part of the window, so constants are preserved exactly.
template <typename S>
Var<S> avg_pool2(const Var<S>& x) {
    const Shape s = x.shape();
    const int oh = (s.h + 1) / 2, ow = (s.w + 1) / 2;
    Tensor<S> out(Shape{s.n, s.c, oh, ow});
    const Tensor<S>& v = x.value();
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const int y1 = std::min(2 * oy + 1, s.h - 1), x1 = std::min(2 * ox + 1, s.w - 1);
                    S acc = 0;
                    int cnt = 0;
                    for (int y = 2 * oy; y <= y1; ++y)
                        for (int xx = 2 * ox; xx <= x1; ++xx, ++cnt) acc += v.at(n, c, y, xx);
                    out.at(n, c, oy, ox) = acc / S(cnt);
                }
    auto px = x.node();
    return make_op<S>(std::move(out), {x}, [px, s, oh, ow](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        Tensor<S> gx(s);
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const int y1 = std::min(2 * oy + 1, s.h - 1), x1 = std::min(2 * ox + 1, s.w - 1);
                        const int cnt = (y1 - 2 * oy + 1) * (x1 - 2 * ox + 1);
                        const S gv = g.at(n, c, oy, ox) / S(cnt);
                        for (int y = 2 * oy; y <= y1; ++y)
                            for (int xx = 2 * ox; xx <= x1; ++xx) gx.at(n, c, y, xx) += gv;
                    }
        px->accumulate(gx);
    });
}

/// Nearest-neighbor x2 upsampling.
template <typename S>
Var<S> upsample2(const Var<S>& x) {
    const Shape s = x.shape();
    Tensor<S> out(Shape{s.n, s.c, 2 * s.h, 2 * s.w});
    const Tensor<S>& v = x.value();
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < 2 * s.h; ++y) {
                const S* src = &v.data[v.index(n, c, y / 2, 0)];
                S* dst = &out.data[out.index(n, c, y, 0)];
                for (int xx = 0; xx < 2 * s.w; ++xx) dst[xx] = src[xx / 2];
            }
    auto px = x.node();
    return make_op<S>(std::move(out), {x}, [px, s](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        Tensor<S> gx(s);
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < 2 * s.h; ++y) {
                    S* dst = &gx.data[gx.index(n, c, y / 2, 0)];
                    const S* src = &g.data[g.index(n, c, y, 0)];
                    for (int xx = 0; xx < 2 * s.w; ++xx) dst[xx / 2] += src[xx];
                }
        px->accumulate(gx);
    });
}

/// Channel-wise concatenation of two batches with matching spatial dims.
template <typename S>
Var<S> concat_channels(const Var<S>& a, const Var<S>& b) {
    const Shape sa = a.shape(), sb = b.shape();
    check_arg(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, "concat_channels: shape mismatch");
    Tensor<S> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    const auto hw = sa.spatial();
    for (int n = 0; n < sa.n; ++n) {
        out.sample_matrix(n).topRows(sa.c) = a.value().sample_matrix(n);
        out.sample_matrix(n).bottomRows(sb.c) = b.value().sample_matrix(n);
    }
    auto pa = a.node();
    auto pb = b.node();
    return make_op<S>(std::move(out), {a, b}, [pa, pb, sa, sb, hw](const Tensor<S>& g) {
        if (pa->requires_grad) {
            Tensor<S> ga(sa);
            for (int n = 0; n < sa.n; ++n) ga.sample_matrix(n) = g.sample_matrix(n).topRows(sa.c);
            pa->accumulate(ga);
        }
        if (pb->requires_grad) {
            Tensor<S> gb(sb);
            for (int n = 0; n < sb.n; ++n) gb.sample_matrix(n) = g.sample_matrix(n).bottomRows(sb.c);
            pb->accumulate(gb);
        }
    });
}

namespace detail {

// im2col for stride-1 convolution with symmetric zero padding.
// cols is (ic*kh*kw) x (h*w), row-major.
template <typename S>
void im2col(const Tensor<S>& x, int n, int k, int pad,
            Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& cols) {
    const Shape s = x.shape;
    const int h = s.h, w = s.w;
    cols.resize(std::int64_t(s.c) * k * k, std::int64_t(h) * w);
    for (int ci = 0; ci < s.c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                S* row = cols.data() + (std::int64_t(ci) * k * k + ky * k + kx) * h * w;
                for (int oy = 0; oy < h; ++oy) {
                    const int iy = oy + ky - pad;
                    S* dst = row + std::int64_t(oy) * w;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + w, S(0));
                        continue;
                    }
                    const S* src = &x.data[x.index(n, ci, iy, 0)];
                    const int shift = kx - pad;  // ix = ox + shift
                    const int x_lo = std::max(0, -shift), x_hi = std::min(w, w - shift);
                    std::fill(dst, dst + x_lo, S(0));
                    if (x_hi > x_lo) std::memcpy(dst + x_lo, src + x_lo + shift, sizeof(S) * (x_hi - x_lo));
                    std::fill(dst + std::max(x_lo, x_hi), dst + w, S(0));
                }
            }
}

template <typename S>
void col2im_add(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& cols,
                int n, int k, int pad, Tensor<S>& gx) {
    const Shape s = gx.shape;
    const int h = s.h, w = s.w;
    for (int ci = 0; ci < s.c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const S* row = cols.data() + (std::int64_t(ci) * k * k + ky * k + kx) * h * w;
                for (int oy = 0; oy < h; ++oy) {
                    const int iy = oy + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    S* dst = &gx.data[gx.index(n, ci, iy, 0)];
                    const S* src = row + std::int64_t(oy) * w;
                    const int shift = kx - pad;
                    const int x_lo = std::max(0, -shift), x_hi = std::min(w, w - shift);
                    for (int ox = x_lo; ox < x_hi; ++ox) dst[ox + shift] += src[ox];
                }
            }
}

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
RowMat<S>& scratch_cols() {
    thread_local RowMat<S> m;
    return m;
}

}  // namespace detail

/// Stride-1 2d convolution with square kernel and same-size zero padding
/// (pad = k/2). Weight shape (oc, ic, k, k); bias shape (oc,1,1,1).
/// Runs as a GEMM over im2col patches; 1x1 kernels skip the patch copy.
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
    const Shape xs = x.shape(), ws = w.shape();
    check_arg(ws.h == ws.w && (ws.h % 2) == 1, "conv2d: kernel must be odd square");
    check_arg(xs.c == ws.c, "conv2d: channel mismatch " + xs.str() + " vs weight " + ws.str());
    check_arg(b.shape().numel() == ws.n, "conv2d: bias size mismatch");
    const int k = ws.h, pad = k / 2, oc = ws.n;

    using Mat = detail::RowMat<S>;
    Eigen::Map<const Mat> wm(w.value().data.data(), oc, std::int64_t(ws.c) * k * k);
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bv(b.value().data.data(), oc);

    Tensor<S> out(Shape{xs.n, oc, xs.h, xs.w});
    const auto hw = xs.spatial();
    for (int n = 0; n < xs.n; ++n) {
        Eigen::Map<Mat> om(out.data.data() + std::int64_t(n) * oc * hw, oc, hw);
        if (k == 1) {
            om.noalias() = wm * x.value().sample_matrix(n);
        } else {
            auto& cols = detail::scratch_cols<S>();
            detail::im2col(x.value(), n, k, pad, cols);
            om.noalias() = wm * cols;
        }
        om.colwise() += bv;
    }

    auto px = x.node();
    auto pw = w.node();
    auto pb = b.node();
    return make_op<S>(std::move(out), {x, w, b}, [px, pw, pb, xs, ws, k, pad, oc, hw](const Tensor<S>& g) {
        using M = detail::RowMat<S>;
        Eigen::Map<const M> wm(pw->value.data.data(), oc, std::int64_t(ws.c) * k * k);

        Tensor<S> gw, gx, gb;
        if (pw->requires_grad) gw = Tensor<S>(ws);
        if (px->requires_grad) gx = Tensor<S>(xs);
        if (pb->requires_grad) gb = Tensor<S>(Shape{oc, 1, 1, 1});

        Eigen::Map<M> gwm(pw->requires_grad ? gw.data.data() : nullptr, pw->requires_grad ? oc : 0,
                          pw->requires_grad ? std::int64_t(ws.c) * k * k : 0);
        for (int n = 0; n < xs.n; ++n) {
            Eigen::Map<const M> gm(g.data.data() + std::int64_t(n) * oc * hw, oc, hw);
            if (pb->requires_grad)
                Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>(gb.data.data(), oc) += gm.rowwise().sum();
            if (k == 1) {
                if (pw->requires_grad) gwm.noalias() += gm * px->value.sample_matrix(n).transpose();
                if (px->requires_grad) gx.sample_matrix(n).noalias() += wm.transpose() * gm;
            } else {
                auto& cols = detail::scratch_cols<S>();
                if (pw->requires_grad) {
                    detail::im2col(px->value, n, k, pad, cols);
                    gwm.noalias() += gm * cols.transpose();
                }
                if (px->requires_grad) {
                    cols.resize(std::int64_t(xs.c) * k * k, hw);
                    cols.noalias() = wm.transpose() * gm;
                    detail::col2im_add(cols, n, k, pad, gx);
                }
            }
        }
        if (pw->requires_grad) pw->accumulate(gw);
        if (px->requires_grad) px->accumulate(gx);
        if (pb->requires_grad) pb->accumulate(gb);
    });
}

/// Binary cross-entropy with logits, averaged over every element.
/// target_real selects the positive (1) or negative (0) label.
template <typename S>
Var<S> bce_with_logits(const Var<S>& logits, bool target_real) {
    const Tensor<S>& l = logits.value();
    if (!l.all_finite()) throw NumericError("bce_with_logits: non-finite logits");
    const auto n = l.numel();
    // softplus(l) - t*l, with softplus(l) = max(l,0) + log1p(exp(-|l|))
    double acc = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = double(l.data[i]);
        acc += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) - (target_real ? x : 0.0);
    }
    Tensor<S> out(Shape{1, 1, 1, 1});
    out.data[0] = S(acc / double(n));
    auto pl = logits.node();
    return make_op<S>(std::move(out), {logits}, [pl, target_real, n](const Tensor<S>& g) {
        if (!pl->requires_grad) return;
        Tensor<S> gl(pl->value.shape);
        const S t = target_real ? S(1) : S(0);
        const S gs = g.data[0] / S(n);
        gl.data = ((S(1) / (S(1) + (-pl->value.data).exp())) - t) * gs;
        pl->accumulate(gl);
    });
}

/// Mean absolute difference over all elements (the per-layer L1 reduction).
template <typename S>
Var<S> mean_abs_diff(const Var<S>& a, const Var<S>& b) {
    check_arg(a.shape() == b.shape(), "mean_abs_diff: shape mismatch");
    const auto n = a.shape().numel();
    Tensor<S> out(Shape{1, 1, 1, 1});
    out.data[0] = (a.value().data - b.value().data).abs().sum() / S(n);
    auto pa = a.node();
    auto pb = b.node();
    return make_op<S>(std::move(out), {a, b}, [pa, pb, n](const Tensor<S>& g) {
        Tensor<S> sgn(pa->value.shape);
        sgn.data = (pa->value.data - pb->value.data).sign() * (g.data[0] / S(n));
        if (pa->requires_grad) pa->accumulate(sgn);
        if (pb->requires_grad) {
            sgn.data = -sgn.data;
            pb->accumulate(sgn);
        }
    });
}

/// Copy of sample i as a batch of one.
template <typename S>
Var<S> select_sample(const Var<S>& x, int i) {
    const Shape s = x.shape();
    check_arg(i >= 0 && i < s.n, "select_sample: index out of range");
    const auto stride = std::int64_t(s.c) * s.spatial();
    Tensor<S> out(Shape{1, s.c, s.h, s.w});
    out.data = x.value().data.segment(std::int64_t(i) * stride, stride);
    auto px = x.node();
    return make_op<S>(std::move(out), {x}, [px, i, s, stride](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        Tensor<S> gx(s);
        gx.data.segment(std::int64_t(i) * stride, stride) = g.data;
        px->accumulate(gx);
    });
}

/// Reverse the width axis (exact horizontal mirror) on flagged samples.
template <typename S>
Var<S> hflip(const Var<S>& x, const std::vector<char>& flags) {
    const Shape s = x.shape();
    check_arg(int(flags.size()) == s.n, "hflip: flag count mismatch");
    Tensor<S> out = x.value();
    auto mirror = [s](const Tensor<S>& src, Tensor<S>& dst, int n) {
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y) {
                const S* a = &src.data[src.index(n, c, y, 0)];
                S* b = &dst.data[dst.index(n, c, y, 0)];
                for (int xx = 0; xx < s.w; ++xx) b[xx] = a[s.w - 1 - xx];
            }
    };
    for (int n = 0; n < s.n; ++n)
        if (flags[n]) mirror(x.value(), out, n);
    auto px = x.node();
    return make_op<S>(std::move(out), {x}, [px, s, flags, mirror](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        Tensor<S> gx = g;
        for (int n = 0; n < s.n; ++n)
            if (flags[n]) mirror(g, gx, n);
        px->accumulate(gx);
    });
}

/// Per-sample affine warp with bilinear resampling and zero padding.
/// mats[n] = {a, b, tx, c, d, ty} maps destination pixel (x, y) to source1
/// coordinates (a*x + b*y + tx, c*x + d*y + ty). An exact identity matrix
/// copies the sample untouched, bit for bit.
template <typename S>
Var<S> affine_warp(const Var<S>& x, const std::vector<std::array<double, 6>>& mats) {
    const Shape s = x.shape();
    check_arg(int(mats.size()) == s.n, "affine_warp: matrix count mismatch");
    auto is_identity = [](const std::array<double, 6>& m) {
        return m[0] == 1.0 && m[1] == 0.0 && m[2] == 0.0 && m[3] == 0.0 && m[4] == 1.0 && m[5] == 0.0;
    };
    Tensor<S> out = x.value();
    const Tensor<S>& v = x.value();
    for (int n = 0; n < s.n; ++n) {
        if (is_identity(mats[n])) continue;
        const auto& m = mats[n];
        for (int y = 0; y < s.h; ++y)
            for (int xx = 0; xx < s.w; ++xx) {
                const double sx = m[0] * xx + m[1] * y + m[2];
                const double sy = m[3] * xx + m[4] * y + m[5];
                const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
                const double fx = sx - x0, fy = sy - y0;
                const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy);
                const double w10 = (1 - fx) * fy, w11 = fx * fy;
                for (int c = 0; c < s.c; ++c) {
                    auto pix = [&](int yy, int xc) -> double {
                        if (yy < 0 || yy >= s.h || xc < 0 || xc >= s.w) return 0.0;
                        return double(v.at(n, c, yy, xc));
                    };
                    out.at(n, c, y, xx) = S(w00 * pix(y0, x0) + w01 * pix(y0, x0 + 1) +
                                            w10 * pix(y0 + 1, x0) + w11 * pix(y0 + 1, x0 + 1));
                }
            }
    }
    auto px = x.node();
    return make_op<S>(std::move(out), {x}, [px, s, mats, is_identity](const Tensor<S>& g) {
        if (!px->requires_grad) return;
        Tensor<S> gx(s);
        for (int n = 0; n < s.n; ++n) {
            if (is_identity(mats[n])) {
                for (int c = 0; c < s.c; ++c)
                    for (int y = 0; y < s.h; ++y)
                        for (int xx = 0; xx < s.w; ++xx) gx.at(n, c, y, xx) += g.at(n, c, y, xx);
                continue;
            }
            const auto& m = mats[n];
            for (int y = 0; y < s.h; ++y)
                for (int xx = 0; xx < s.w; ++xx) {
                    const double sx = m[0] * xx + m[1] * y + m[2];
                    const double sy = m[3] * xx + m[4] * y + m[5];
                    const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
                    const double fx = sx - x0, fy = sy - y0;
                    const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
                    const int yy[4] = {y0, y0, y0 + 1, y0 + 1};
                    const int xc[4] = {x0, x0 + 1, x0, x0 + 1};
                    for (int c = 0; c < s.c; ++c) {
                        const S gv = g.at(n, c, y, xx);
                        for (int t = 0; t < 4; ++t)
                            if (yy[t] >= 0 && yy[t] < s.h && xc[t] >= 0 && xc[t] < s.w)
                                gx.at(n, c, yy[t], xc[t]) += S(ws[t]) * gv;
                    }
                }
        }
        px->accumulate(gx);
    });
}

/// Spectral weight scaling W / sigma with sigma = u^T W v; u and v are the
/// persistent power-iteration vectors, treated as constants on the tape.
template <typename S>
Var<S> spectral_scale(const Var<S>& w, const Eigen::Matrix<S, Eigen::Dynamic, 1>& u,
                      const Eigen::Matrix<S, Eigen::Dynamic, 1>& v) {
    const Shape ws = w.shape();
    const int rows = ws.n;
    const auto cols = ws.numel() / rows;
    check_arg(u.size() == rows && v.size() == cols, "spectral_scale: vector size mismatch");
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> wm(w.value().data.data(), rows, cols);
    const S sigma = u.dot(wm * v);
    check_arg(std::abs(double(sigma)) > 1e-30, "spectral_scale: vanishing sigma");
    Tensor<S> out = w.value();
    out.data /= sigma;
    auto pw = w.node();
    Tensor<S> wbar = out;
    return make_op<S>(std::move(out), {w}, [pw, u, v, sigma, wbar, rows, cols](const Tensor<S>& g) {
        if (!pw->requires_grad) return;
        // d(W/sigma)/dW: g/sigma - (<g, Wbar>/sigma) * u v^T
        Tensor<S> gw = g;
        gw.data /= sigma;
        const S coef = (g.data * wbar.data).sum() / sigma;
        using M = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<M> gm(gw.data.data(), rows, cols);
        gm.noalias() -= coef * (u * v.transpose());
        pw->accumulate(gw);
    });
}

}  // namespace sivgan::ops

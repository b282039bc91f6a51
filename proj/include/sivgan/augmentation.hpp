// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <utility>
#include <vector>

#include "sivgan/ops.hpp"
#include "sivgan/rng.hpp"

namespace sivgan {

struct Rect {
    int top = 0, left = 0, height = 0, width = 0;
    bool empty() const { return height == 0 || width == 0; }
};

/// Feature augmentation: mixing applied to real-sample features inside the
/// discriminator. Gated once per forward pass; when it fires, every
/// consecutive sample pair (i, i+1) is mixed, sample i receiving from its
/// donor i+1. All receivers share one rect and one pair of channel sets.
struct FeatureAugPlan {
    bool apply = false;
    std::vector<std::pair<int, int>> pairs;  // (receiver, donor)
    Rect layout_rect;                        // in feature-grid units
    std::vector<int> content_mix_channels;   // sorted, disjoint from drop
    std::vector<int> content_drop_channels;  // sorted
};

struct FeatureAugConfig {
    double p_fa = 0.4;
    double rect_area_lo = 0.1, rect_area_hi = 0.5;
    double rect_aspect_lo = 0.5, rect_aspect_hi = 2.0;
    double mix_frac_lo = 0.1, mix_frac_hi = 0.5;
    double drop_frac_lo = 0.05, drop_frac_hi = 0.25;
};

/// Grid is the shared feature map entering the branches: rect coordinates
/// live on its HxW plane, channel sets on its C channels.
inline FeatureAugPlan sample_feature_aug_plan(Rng& rng, int batch, int H, int W, int C,
                                              const FeatureAugConfig& cfg) {
    FeatureAugPlan plan;
    plan.apply = rng.bernoulli(cfg.p_fa);
    if (!plan.apply) return plan;
    check_arg(batch >= 2, "sample_feature_aug_plan: feature mixing needs batch >= 2");
    for (int i = 0; i + 1 < batch; ++i) plan.pairs.push_back({i, i + 1});

    const double area = rng.uniform(cfg.rect_area_lo, cfg.rect_area_hi) * H * W;
    const double aspect = rng.uniform(cfg.rect_aspect_lo, cfg.rect_aspect_hi);  // width / height
    const int rh = std::clamp(int(std::lround(std::sqrt(area / aspect))), 1, H);
    const int rw = std::clamp(int(std::lround(std::sqrt(area * aspect))), 1, W);
    plan.layout_rect = {int(rng.uniform_int(0, H - rh)), int(rng.uniform_int(0, W - rw)), rh, rw};

    int n_mix = int(std::lround(rng.uniform(cfg.mix_frac_lo, cfg.mix_frac_hi) * C));
    int n_drop = int(std::lround(rng.uniform(cfg.drop_frac_lo, cfg.drop_frac_hi) * C));
    n_mix = std::clamp(n_mix, 0, C);
    n_drop = std::clamp(n_drop, 0, C - n_mix);
    std::vector<int> perm(C);
    for (int c = 0; c < C; ++c) perm[c] = c;
    rng.shuffle(perm);
    plan.content_mix_channels.assign(perm.begin(), perm.begin() + n_mix);
    plan.content_drop_channels.assign(perm.begin() + n_mix, perm.begin() + n_mix + n_drop);
    std::sort(plan.content_mix_channels.begin(), plan.content_mix_channels.end());
    std::sort(plan.content_drop_channels.begin(), plan.content_drop_channels.end());
    return plan;
}

namespace detail {

inline void check_rect(const Rect& r, const Shape& s) {
    check_arg(r.top >= 0 && r.left >= 0 && r.height >= 0 && r.width >= 0 &&
                  r.top + r.height <= s.h && r.left + r.width <= s.w,
              "rect out of bounds");
}

inline void check_channels(const std::vector<int>& ch, int c) {
    for (int i : ch) check_arg(i >= 0 && i < c, "channel index out of range");
}

}  // namespace detail

/// Paste the rect region of f2 onto f1; outside the rect f1 is untouched.
template <typename S>
Tensor<S> layout_feature_mix(const Tensor<S>& f1, const Tensor<S>& f2, const Rect& rect) {
    check_arg(f1.shape == f2.shape, "layout_feature_mix: shape mismatch");
    detail::check_rect(rect, f1.shape);
    Tensor<S> out = f1;
    const Shape s = f1.shape;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = rect.top; y < rect.top + rect.height; ++y)
                for (int x = rect.left; x < rect.left + rect.width; ++x)
                    out.at(n, c, y, x) = f2.at(n, c, y, x);
    return out;
}

/// Copy the listed channels of f2 into f1; other channels come from f1.
template <typename S>
Tensor<S> content_channel_mix(const Tensor<S>& f1, const Tensor<S>& f2, const std::vector<int>& channels) {
    check_arg(f1.shape == f2.shape, "content_channel_mix: shape mismatch");
    detail::check_channels(channels, f1.shape.c);
    Tensor<S> out = f1;
    const Shape s = f1.shape;
    const auto hw = s.spatial();
    for (int n = 0; n < s.n; ++n)
        for (int c : channels)
            out.data.segment(out.index(n, c, 0, 0), hw) = f2.data.segment(f2.index(n, c, 0, 0), hw);
    return out;
}

/// Zero the listed channels; survivors are not rescaled.
template <typename S>
Tensor<S> content_channel_dropout(const Tensor<S>& f, const std::vector<int>& channels) {
    detail::check_channels(channels, f.shape.c);
    Tensor<S> out = f;
    const Shape s = f.shape;
    const auto hw = s.spatial();
    for (int n = 0; n < s.n; ++n)
        for (int c : channels) out.data.segment(out.index(n, c, 0, 0), hw).setZero();
    return out;
}

/// Differentiable batch version of the layout mix: every receiver's rect is
/// replaced by its donor's rect, gathered from the original (pre-mix) batch.
template <typename S>
Var<S> apply_layout_aug(const Var<S>& f, const FeatureAugPlan& plan) {
    if (!plan.apply || plan.layout_rect.empty()) return f;
    const Shape s = f.shape();
    detail::check_rect(plan.layout_rect, s);
    const Rect r = plan.layout_rect;
    const auto pairs = plan.pairs;
    for (auto [i, j] : pairs)
        check_arg(i >= 0 && i < s.n && j >= 0 && j < s.n && i != j, "apply_layout_aug: bad pair");
    Tensor<S> out = f.value();
    for (auto [i, j] : pairs)
        for (int c = 0; c < s.c; ++c)
            for (int y = r.top; y < r.top + r.height; ++y)
                for (int x = r.left; x < r.left + r.width; ++x)
                    out.at(i, c, y, x) = f.value().at(j, c, y, x);
    auto pf = f.node();
    return make_op<S>(std::move(out), {f}, [pf, s, r, pairs](const Tensor<S>& g) {
        if (!pf->requires_grad) return;
        Tensor<S> gx = g;
        // inside the rect, receiver gradients belong to the donor
        for (auto [i, j] : pairs)
            for (int c = 0; c < s.c; ++c)
                for (int y = r.top; y < r.top + r.height; ++y)
                    for (int x = r.left; x < r.left + r.width; ++x) gx.at(i, c, y, x) = S(0);
        for (auto [i, j] : pairs)
            for (int c = 0; c < s.c; ++c)
                for (int y = r.top; y < r.top + r.height; ++y)
                    for (int x = r.left; x < r.left + r.width; ++x)
                        gx.at(j, c, y, x) += g.at(i, c, y, x);
        pf->accumulate(gx);
    });
}

/// Differentiable batch version of the content mix plus dropout: receivers
/// take mix channels from their donor, then drop channels are zeroed.
template <typename S>
Var<S> apply_content_aug(const Var<S>& f, const FeatureAugPlan& plan) {
    if (!plan.apply || (plan.content_mix_channels.empty() && plan.content_drop_channels.empty())) return f;
    const Shape s = f.shape();
    detail::check_channels(plan.content_mix_channels, s.c);
    detail::check_channels(plan.content_drop_channels, s.c);
    const auto pairs = plan.pairs;
    const auto mix = plan.content_mix_channels;
    const auto drop = plan.content_drop_channels;
    for (auto [i, j] : pairs)
        check_arg(i >= 0 && i < s.n && j >= 0 && j < s.n && i != j, "apply_content_aug: bad pair");
    const auto hw = s.spatial();
    Tensor<S> out = f.value();
    for (auto [i, j] : pairs) {
        for (int c : mix)
            out.data.segment(out.index(i, c, 0, 0), hw) = f.value().data.segment(f.value().index(j, c, 0, 0), hw);
        for (int c : drop) out.data.segment(out.index(i, c, 0, 0), hw).setZero();
    }
    auto pf = f.node();
    return make_op<S>(std::move(out), {f}, [pf, s, pairs, mix, drop, hw](const Tensor<S>& g) {
        if (!pf->requires_grad) return;
        Tensor<S> gx = g;
        for (auto [i, j] : pairs) {
            for (int c : mix) gx.data.segment(gx.index(i, c, 0, 0), hw).setZero();
            for (int c : drop) gx.data.segment(gx.index(i, c, 0, 0), hw).setZero();
        }
        for (auto [i, j] : pairs)
            for (int c : mix)
                gx.data.segment(gx.index(j, c, 0, 0), hw) += g.data.segment(g.index(i, c, 0, 0), hw);
        pf->accumulate(gx);
    });
}

/// Differentiable image augmentation. Per sample, each transform is gated
/// independently at probability p_da; parameters are stored in resolution-
/// free units so one draw applies consistently across pyramid levels.
struct ImageAugConfig {
    double p_da = 0.7;
    double max_translate = 0.125;  // fraction of the image side
    double crop_scale_lo = 0.8, crop_scale_hi = 1.0;
    double max_rotate_deg = 15.0;
};

struct ImageAugParams {
    struct PerSample {
        bool translate = false, rotate = false, crop = false, flip = false;
        double dx = 0, dy = 0;          // fractions of width / height
        double angle_deg = 0;
        double crop_scale = 1;
        double crop_fx = 0, crop_fy = 0;  // window placement within the slack
    };
    std::vector<PerSample> samples;

    bool any_active() const {
        for (const auto& s : samples)
            if (s.translate || s.rotate || s.crop || s.flip) return true;
        return false;
    }
};

inline ImageAugParams sample_image_aug_params(Rng& rng, int batch, const ImageAugConfig& cfg) {
    ImageAugParams p;
    p.samples.resize(batch);
    for (auto& s : p.samples) {
        s.translate = rng.bernoulli(cfg.p_da);
        if (s.translate) {
            s.dx = rng.uniform(-cfg.max_translate, cfg.max_translate);
            s.dy = rng.uniform(-cfg.max_translate, cfg.max_translate);
        }
        s.rotate = rng.bernoulli(cfg.p_da);
        if (s.rotate) s.angle_deg = rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg);
        s.crop = rng.bernoulli(cfg.p_da);
        if (s.crop) {
            s.crop_scale = rng.uniform(cfg.crop_scale_lo, cfg.crop_scale_hi);
            s.crop_fx = rng.uniform();
            s.crop_fy = rng.uniform();
        }
        s.flip = rng.bernoulli(cfg.p_da);
    }
    return p;
}

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 mat3_identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += a[i][k] * b[k][j];
            r[i][j] = acc;
        }
    return r;
}

/// Destination-to-source matrix for one sample at resolution (h, w).
inline std::array<double, 6> aug_matrix(const ImageAugParams::PerSample& s, int h, int w) {
    Mat3 m = mat3_identity();
    if (s.translate) {
        Mat3 t = mat3_identity();
        t[0][2] = -s.dx * w;
        t[1][2] = -s.dy * h;
        m = mat3_mul(m, t);
    }
    if (s.rotate) {
        const double th = s.angle_deg * M_PI / 180.0;
        const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
        Mat3 r = {{{std::cos(th), std::sin(th), 0}, {-std::sin(th), std::cos(th), 0}, {0, 0, 1}}};
        r[0][2] = cx - r[0][0] * cx - r[0][1] * cy;
        r[1][2] = cy - r[1][0] * cx - r[1][1] * cy;
        m = mat3_mul(m, r);
    }
    if (s.crop) {
        const double k = s.crop_scale;
        Mat3 c = {{{k, 0, s.crop_fx * (1 - k) * (w - 1)}, {0, k, s.crop_fy * (1 - k) * (h - 1)}, {0, 0, 1}}};
        m = mat3_mul(m, c);
    }
    return {m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2]};
}

}  // namespace detail

template <typename S>
Var<S> differentiable_augment(const Var<S>& images, const ImageAugParams& params) {
    const Shape s = images.shape();
    check_arg(int(params.samples.size()) == s.n, "differentiable_augment: batch size mismatch");
    if (!params.any_active()) return images;
    std::vector<std::array<double, 6>> mats;
    std::vector<char> flips;
    bool any_warp = false, any_flip = false;
    for (const auto& ps : params.samples) {
        if (ps.translate || ps.rotate || ps.crop) {
            mats.push_back(detail::aug_matrix(ps, s.h, s.w));
            any_warp = true;
        } else {
            mats.push_back({1, 0, 0, 0, 1, 0});
        }
        flips.push_back(ps.flip ? 1 : 0);
        any_flip = any_flip || ps.flip;
    }
    Var<S> out = images;
    if (any_warp) out = ops::affine_warp(out, mats);
    if (any_flip) out = ops::hflip(out, flips);
    return out;
}

}  // namespace sivgan

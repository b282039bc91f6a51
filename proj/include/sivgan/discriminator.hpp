// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sivgan/augmentation.hpp"
#include "sivgan/errors.hpp"
#include "sivgan/nn.hpp"

namespace sivgan {

struct DiscriminatorConfig {
    int n_low_level = 3;
    int n_branch = 4;  // content and layout block counts
    int layout_channels = 1;
    std::vector<int> channel_schedule;  // length n_low_level + 1: stem width, then per-block widths
    int n_multiscale_inputs = 3;

    void validate() const {
        if (n_low_level < 1) throw ConfigError("discriminator: n_low_level must be >= 1");
        if (n_branch < 1) throw ConfigError("discriminator: n_branch must be >= 1");
        if (layout_channels < 1) throw ConfigError("discriminator: layout_channels must be >= 1");
        if (n_multiscale_inputs < 1) throw ConfigError("discriminator: n_multiscale_inputs must be >= 1");
        if (int(channel_schedule.size()) != n_low_level + 1)
            throw ConfigError("discriminator: channel_schedule must have n_low_level+1 entries, got " +
                              std::to_string(channel_schedule.size()));
        for (int c : channel_schedule)
            if (c < 1) throw ConfigError("discriminator: channel_schedule entries must be >= 1");
    }
};

inline std::vector<int> default_disc_schedule(int n_low_level, double width_mult = 1.0) {
    static const int base[] = {64, 128, 256, 256, 512, 512, 512};
    std::vector<int> s;
    for (int i = 0; i <= n_low_level; ++i) {
        const int b = base[std::min<int>(i, std::size(base) - 1)];
        s.push_back(std::max(1, int(std::lround(b * width_mult))));
    }
    return s;
}

/// Per-block logit maps, one channel each.
template <typename S>
struct DiscriminatorDecision {
    std::vector<Var<S>> low_level;  // spatial maps
    std::vector<Var<S>> content;    // (batch, 1, 1, 1) each
    std::vector<Var<S>> layout;     // spatial maps
};

/// Intermediate features captured for analysis and tests.
template <typename S>
struct DiscriminatorTrace {
    Var<S> shared;         // trunk output F(x)
    Var<S> content_in;     // pooled features entering the content branch (post FA)
    Var<S> layout_in;      // squeezed features entering the first layout block (post FA)
    Var<S> content_final;  // pre-logit features of the last content block
    Var<S> layout_final;   // pre-logit features of the last layout block
};

/// Pre-activation residual block with stride-2 average-pool downsampling.
template <typename S>
struct DownBlock {
    nn::Conv2d<S> conv1, conv2, skip;

    static DownBlock create(Rng& rng, int in_c, int out_c, int k) {
        DownBlock b;
        b.conv1 = nn::Conv2d<S>::create(rng, in_c, out_c, k, true);
        b.conv2 = nn::Conv2d<S>::create(rng, out_c, out_c, k, true);
        b.skip = nn::Conv2d<S>::create(rng, in_c, out_c, 1, true);
        return b;
    }

    Var<S> forward(const Var<S>& x) const {
        Var<S> h = conv1.forward(ops::leaky_relu(x));
        h = ops::avg_pool2(conv2.forward(ops::leaky_relu(h)));
        return ops::add(h, ops::avg_pool2(skip.forward(x)));
    }
};

/// Residual block of 1x1 convolutions at constant width with identity skip;
/// acts per location, so on pooled features it is a fully-connected block.
template <typename S>
struct PointwiseBlock {
    nn::Conv2d<S> conv1, conv2;

    static PointwiseBlock create(Rng& rng, int c) {
        PointwiseBlock b;
        b.conv1 = nn::Conv2d<S>::create(rng, c, c, 1, true);
        b.conv2 = nn::Conv2d<S>::create(rng, c, c, 1, true);
        return b;
    }

    Var<S> forward(const Var<S>& x) const {
        Var<S> h = conv1.forward(ops::leaky_relu(x));
        h = conv2.forward(ops::leaky_relu(h));
        return ops::add(h, x);
    }
};

/// Spatial average over the grid; channel vector survives.
template <typename S>
Var<S> squeeze_content(const Var<S>& shared) {
    return ops::global_avg_pool(shared);
}

/// Channel squeeze to layout width via the given 1x1 projection.
template <typename S>
Var<S> squeeze_layout(const Var<S>& shared, const nn::Conv2d<S>& proj) {
    return proj.forward(shared);
}

template <typename S>
class Discriminator {
public:
    Discriminator() = default;

    static Discriminator build(const DiscriminatorConfig& cfg, Rng& rng) {
        cfg.validate();
        Discriminator d;
        d.cfg_ = cfg;
        const auto& cs = cfg.channel_schedule;
        d.stem_ = nn::Conv2d<S>::create(rng, 3, cs[0], 3, true);
        for (int i = 1; i <= cfg.n_low_level; ++i) {
            int in_c = cs[i - 1];
            if (i >= 2 && i <= cfg.n_multiscale_inputs) {
                const int inj_c = std::max(1, cs[i - 1] / 4);
                d.inject_.push_back(nn::Conv2d<S>::create(rng, 3, inj_c, 1, true));
                in_c += inj_c;
            }
            d.trunk_.push_back(DownBlock<S>::create(rng, in_c, cs[i], 3));
            d.trunk_heads_.push_back(nn::Conv2d<S>::create(rng, cs[i], 1, 1, true));
        }
        const int c = cs.back();
        for (int i = 0; i < cfg.n_branch; ++i) {
            d.content_.push_back(PointwiseBlock<S>::create(rng, c));
            d.content_heads_.push_back(nn::Conv2d<S>::create(rng, c, 1, 1, true));
        }
        d.layout_squeeze_ = nn::Conv2d<S>::create(rng, c, cfg.layout_channels, 1, true);
        for (int i = 0; i < cfg.n_branch; ++i) {
            d.layout_.push_back(DownBlock<S>::create(rng, cfg.layout_channels, cfg.layout_channels, 3));
            d.layout_heads_.push_back(nn::Conv2d<S>::create(rng, cfg.layout_channels, 1, 1, true));
        }
        return d;
    }

    /// Trunk pass over a coarse-to-fine pyramid: the finest level enters the
    /// stem; levels below full resolution are injected at matching-resolution
    /// blocks via 1x1 convolutions and channel concatenation.
    Var<S> trunk_forward(const std::vector<Var<S>>& pyramid, std::vector<Var<S>>* logits = nullptr) const {
        check_arg(int(pyramid.size()) == cfg_.n_multiscale_inputs,
                  "discriminate: expected " + std::to_string(cfg_.n_multiscale_inputs) + " pyramid levels");
        for (size_t k = 0; k + 1 < pyramid.size(); ++k) {
            const Shape a = pyramid[k].shape(), b = pyramid[k + 1].shape();
            check_arg(2 * a.h == b.h && 2 * a.w == b.w, "discriminate: pyramid is not a x2 scale chain");
        }
        Var<S> h = stem_.forward(pyramid.back());
        int inj = 0;
        for (int i = 1; i <= cfg_.n_low_level; ++i) {
            if (i >= 2 && i <= cfg_.n_multiscale_inputs) {
                const Var<S>& img = pyramid[cfg_.n_multiscale_inputs - i];
                check_arg(img.shape().h == h.shape().h && img.shape().w == h.shape().w,
                          "discriminate: pyramid level does not match trunk resolution");
                h = ops::concat_channels(h, inject_[inj++].forward(img));
            }
            h = trunk_[i - 1].forward(h);
            if (logits) logits->push_back(trunk_heads_[i - 1].forward(h));
        }
        return h;
    }

    /// Content branch over already-pooled features (batch, C, 1, 1).
    Var<S> content_forward(const Var<S>& pooled, std::vector<Var<S>>* logits,
                           Var<S>* final_features = nullptr) const {
        Var<S> h = pooled;
        for (int i = 0; i < cfg_.n_branch; ++i) {
            h = content_[i].forward(h);
            if (logits) logits->push_back(content_heads_[i].forward(h));
        }
        if (final_features) *final_features = h;
        return h;
    }

    /// Layout branch over already-squeezed features (batch, layout_channels, H, W).
    Var<S> layout_forward(const Var<S>& squeezed, std::vector<Var<S>>* logits,
                          Var<S>* final_features = nullptr) const {
        Var<S> h = squeezed;
        for (int i = 0; i < cfg_.n_branch; ++i) {
            h = layout_[i].forward(h);
            if (logits) logits->push_back(layout_heads_[i].forward(h));
        }
        if (final_features) *final_features = h;
        return h;
    }

    /// Full two-branch decision. A feature-augmentation plan, when supplied,
    /// mixes the branch inputs; callers pass it for real samples only.
    DiscriminatorDecision<S> discriminate(const std::vector<Var<S>>& pyramid,
                                          const FeatureAugPlan* fa = nullptr,
                                          DiscriminatorTrace<S>* trace = nullptr) const {
        DiscriminatorDecision<S> dec;
        Var<S> shared = trunk_forward(pyramid, &dec.low_level);
        Var<S> pooled = squeeze_content(shared);
        Var<S> squeezed = squeeze_layout(shared, layout_squeeze_);
        if (fa && fa->apply) {
            pooled = apply_content_aug(pooled, *fa);
            squeezed = apply_layout_aug(squeezed, *fa);
            ++fa_applies_;
        }
        Var<S> content_final, layout_final;
        content_forward(pooled, &dec.content, &content_final);
        layout_forward(squeezed, &dec.layout, &layout_final);
        if (trace) {
            trace->shared = shared;
            trace->content_in = pooled;
            trace->layout_in = squeezed;
            trace->content_final = content_final;
            trace->layout_final = layout_final;
        }
        return dec;
    }

    /// L2 distance between the final pre-logit features of one branch.
    double branch_embedding_distance(const std::vector<Var<S>>& pyr1, const std::vector<Var<S>>& pyr2,
                                     const std::string& branch) const {
        check_arg(branch == "content" || branch == "layout", "branch_embedding_distance: unknown branch");
        NoGradScope ng;
        DiscriminatorTrace<S> t1, t2;
        discriminate(pyr1, nullptr, &t1);
        discriminate(pyr2, nullptr, &t2);
        const Tensor<S>& a = branch == "content" ? t1.content_final.value() : t1.layout_final.value();
        const Tensor<S>& b = branch == "content" ? t2.content_final.value() : t2.layout_final.value();
        check_arg(a.shape == b.shape, "branch_embedding_distance: shape mismatch");
        return std::sqrt(double((a.data - b.data).square().sum()));
    }

    void power_iteration(int steps = 1) {
        for (auto* c : convs()) c->power_iteration(steps);
    }

    std::vector<nn::NamedParam<S>> params(const std::string& prefix = "d") {
        std::vector<nn::NamedParam<S>> out;
        stem_.params(prefix + ".stem", out);
        for (size_t i = 0; i < inject_.size(); ++i)
            inject_[i].params(prefix + ".inject" + std::to_string(i), out);
        for (size_t i = 0; i < trunk_.size(); ++i) {
            const std::string p = prefix + ".trunk" + std::to_string(i);
            trunk_[i].conv1.params(p + ".conv1", out);
            trunk_[i].conv2.params(p + ".conv2", out);
            trunk_[i].skip.params(p + ".skip", out);
            trunk_heads_[i].params(p + ".head", out);
        }
        for (size_t i = 0; i < content_.size(); ++i) {
            const std::string p = prefix + ".content" + std::to_string(i);
            content_[i].conv1.params(p + ".conv1", out);
            content_[i].conv2.params(p + ".conv2", out);
            content_heads_[i].params(p + ".head", out);
        }
        layout_squeeze_.params(prefix + ".layout_squeeze", out);
        for (size_t i = 0; i < layout_.size(); ++i) {
            const std::string p = prefix + ".layout" + std::to_string(i);
            layout_[i].conv1.params(p + ".conv1", out);
            layout_[i].conv2.params(p + ".conv2", out);
            layout_[i].skip.params(p + ".skip", out);
            layout_heads_[i].params(p + ".head", out);
        }
        return out;
    }

    std::vector<std::pair<std::string, nn::VecX<S>*>> sn_state(const std::string& prefix = "d") {
        std::vector<std::pair<std::string, nn::VecX<S>*>> out;
        stem_.sn_state(prefix + ".stem", out);
        for (size_t i = 0; i < inject_.size(); ++i)
            inject_[i].sn_state(prefix + ".inject" + std::to_string(i), out);
        for (size_t i = 0; i < trunk_.size(); ++i) {
            const std::string p = prefix + ".trunk" + std::to_string(i);
            trunk_[i].conv1.sn_state(p + ".conv1", out);
            trunk_[i].conv2.sn_state(p + ".conv2", out);
            trunk_[i].skip.sn_state(p + ".skip", out);
            trunk_heads_[i].sn_state(p + ".head", out);
        }
        for (size_t i = 0; i < content_.size(); ++i) {
            const std::string p = prefix + ".content" + std::to_string(i);
            content_[i].conv1.sn_state(p + ".conv1", out);
            content_[i].conv2.sn_state(p + ".conv2", out);
            content_heads_[i].sn_state(p + ".head", out);
        }
        layout_squeeze_.sn_state(prefix + ".layout_squeeze", out);
        for (size_t i = 0; i < layout_.size(); ++i) {
            const std::string p = prefix + ".layout" + std::to_string(i);
            layout_[i].conv1.sn_state(p + ".conv1", out);
            layout_[i].conv2.sn_state(p + ".conv2", out);
            layout_[i].skip.sn_state(p + ".skip", out);
            layout_heads_[i].sn_state(p + ".head", out);
        }
        return out;
    }

    std::vector<nn::Conv2d<S>*> convs() {
        std::vector<nn::Conv2d<S>*> out = {&stem_};
        for (auto& c : inject_) out.push_back(&c);
        for (size_t i = 0; i < trunk_.size(); ++i) {
            out.push_back(&trunk_[i].conv1);
            out.push_back(&trunk_[i].conv2);
            out.push_back(&trunk_[i].skip);
            out.push_back(&trunk_heads_[i]);
        }
        for (size_t i = 0; i < content_.size(); ++i) {
            out.push_back(&content_[i].conv1);
            out.push_back(&content_[i].conv2);
            out.push_back(&content_heads_[i]);
        }
        out.push_back(&layout_squeeze_);
        for (size_t i = 0; i < layout_.size(); ++i) {
            out.push_back(&layout_[i].conv1);
            out.push_back(&layout_[i].conv2);
            out.push_back(&layout_[i].skip);
            out.push_back(&layout_heads_[i]);
        }
        return out;
    }

    int head_count() const {
        return cfg_.n_low_level + 2 * cfg_.n_branch;
    }

    const DiscriminatorConfig& config() const { return cfg_; }
    const nn::Conv2d<S>& layout_squeeze() const { return layout_squeeze_; }

    /// Number of discriminate calls that actually mixed features; the
    /// training step uses it to prove mixing never touches fake batches.
    std::int64_t fa_apply_count() const { return fa_applies_; }

private:
    DiscriminatorConfig cfg_;
    mutable std::int64_t fa_applies_ = 0;
    nn::Conv2d<S> stem_;
    std::vector<DownBlock<S>> trunk_;
    std::vector<nn::Conv2d<S>> inject_;
    std::vector<nn::Conv2d<S>> trunk_heads_;
    std::vector<PointwiseBlock<S>> content_;
    std::vector<nn::Conv2d<S>> content_heads_;
    nn::Conv2d<S> layout_squeeze_;
    std::vector<DownBlock<S>> layout_;
    std::vector<nn::Conv2d<S>> layout_heads_;
};

}  // namespace sivgan

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sivgan/errors.hpp"
#include "sivgan/nn.hpp"

namespace sivgan {

inline constexpr int kLatentChannels = 64;

struct GeneratorConfig {
    int noise_h = 3;
    int noise_w = 5;
    int num_blocks = 6;
    std::vector<int> channel_schedule;  // length num_blocks + 1, widest first
    int n_multiscale_outputs = 3;

    void validate() const {
        if (noise_h < 1 || noise_w < 1) throw ConfigError("generator: noise dims must be >= 1");
        if (num_blocks < 1) throw ConfigError("generator: num_blocks must be >= 1");
        if (n_multiscale_outputs < 1 || n_multiscale_outputs > num_blocks)
            throw ConfigError("generator: need 1 <= n_multiscale_outputs <= num_blocks");
        if (int(channel_schedule.size()) != num_blocks + 1)
            throw ConfigError("generator: channel_schedule must have num_blocks+1 entries, got " +
                              std::to_string(channel_schedule.size()));
        for (size_t i = 0; i < channel_schedule.size(); ++i) {
            if (channel_schedule[i] < 1) throw ConfigError("generator: channel_schedule entries must be >= 1");
            if (i > 0 && channel_schedule[i] > channel_schedule[i - 1])
                throw ConfigError("generator: channel_schedule must be non-increasing");
        }
    }

    int out_h() const { return noise_h << num_blocks; }
    int out_w() const { return noise_w << num_blocks; }
};

/// BigGAN-style width taper scaled by a global multiplier; truncated or
/// last-value-extended to num_blocks+1 entries.
inline std::vector<int> default_channel_schedule(int num_blocks, double width_mult = 1.0) {
    static const int base[] = {512, 512, 256, 256, 128, 64, 64};
    std::vector<int> s;
    for (int i = 0; i <= num_blocks; ++i) {
        const int b = base[std::min<int>(i, std::size(base) - 1)];
        s.push_back(std::max(1, int(std::lround(b * width_mult))));
    }
    return s;
}

/// Picks (h0, w0, B) so that h0*2^B x w0*2^B tracks the target size,
/// preferring exact area, then aspect, then a grid near 4x4, then fewer
/// blocks. Brute force over h0, w0 in [2,8], B in [3,8].
inline void select_noise_shape(int target_h, int target_w, int& h0, int& w0, int& B) {
    check_arg(target_h >= 32 && target_w >= 32, "select_noise_shape: target must be at least 32x32");
    double best_area = 1e30, best_aspect = 1e30;
    int best_grid = 1 << 30, best_b = 1 << 30;
    bool found = false;
    const double want_aspect = double(target_w) / target_h;
    for (int b = 3; b <= 8; ++b)
        for (int h = 2; h <= 8; ++h)
            for (int w = 2; w <= 8; ++w) {
                const double oh = double(h) * (1 << b), ow = double(w) * (1 << b);
                const double area_err = std::abs(oh * ow - double(target_h) * target_w) /
                                        (double(target_h) * target_w);
                if (area_err > 0.25) continue;
                const double aspect_err = std::abs(double(w) / h - want_aspect);
                const int grid = std::abs(h * w - 16);
                auto cand = std::make_tuple(area_err, aspect_err, grid, b);
                auto best = std::make_tuple(best_area, best_aspect, best_grid, best_b);
                if (!found || cand < best) {
                    found = true;
                    best_area = area_err;
                    best_aspect = aspect_err;
                    best_grid = grid;
                    best_b = b;
                    h0 = h;
                    w0 = w;
                    B = b;
                }
            }
    if (!found)
        throw ConfigError("select_noise_shape: no noise shape within 25% of " + std::to_string(target_h) +
                          "x" + std::to_string(target_w) + "; set gen.noise_h/gen.noise_w/gen.num_blocks");
}

template <typename S>
struct LatentBatch {
    Tensor<S> values;  // (batch, 64, h0, w0)
    std::uint64_t seed = 0;
};

template <typename S>
LatentBatch<S> sample_latent(std::uint64_t seed, int batch, const GeneratorConfig& cfg) {
    check_arg(batch >= 1, "sample_latent: batch must be >= 1");
    LatentBatch<S> z;
    z.seed = seed;
    z.values = Tensor<S>(Shape{batch, kLatentChannels, cfg.noise_h, cfg.noise_w});
    Rng rng(seed);
    for (std::int64_t i = 0; i < z.values.numel(); ++i) z.values.data[i] = S(rng.normal());
    return z;
}

template <typename S>
struct GeneratorOutput {
    Var<S> final_image;                      // (batch, 3, h0*2^B, w0*2^B), in [-1, 1]
    std::vector<Var<S>> intermediate_images; // coarse to fine; last entry is final_image
    std::vector<Var<S>> dr_features;         // one per block, tanh range
};

/// Pre-activation residual upsampling block. The diversity feature is the
/// tanh of the main path after its last convolution.
template <typename S>
struct GenBlock {
    nn::Conv2d<S> conv1, conv2, skip;

    static GenBlock create(Rng& rng, int in_c, int out_c) {
        GenBlock b;
        b.conv1 = nn::Conv2d<S>::create(rng, in_c, out_c, 3, true);
        b.conv2 = nn::Conv2d<S>::create(rng, out_c, out_c, 3, true);
        b.skip = nn::Conv2d<S>::create(rng, in_c, out_c, 1, true);
        return b;
    }

    void forward(const Var<S>& x, Var<S>& out, Var<S>& dr) const {
        Var<S> u = ops::upsample2(x);
        Var<S> h = conv1.forward(ops::leaky_relu(u));
        h = conv2.forward(ops::leaky_relu(h));
        out = ops::add(h, skip.forward(u));
        dr = ops::tanh_op(h);
    }
};

template <typename S>
class Generator {
public:
    Generator() = default;

    static Generator build(const GeneratorConfig& cfg, Rng& rng) {
        cfg.validate();
        Generator g;
        g.cfg_ = cfg;
        g.input_ = nn::Conv2d<S>::create(rng, kLatentChannels, cfg.channel_schedule[0], 3, true);
        for (int i = 0; i < cfg.num_blocks; ++i)
            g.blocks_.push_back(GenBlock<S>::create(rng, cfg.channel_schedule[i], cfg.channel_schedule[i + 1]));
        for (int i = 0; i < cfg.n_multiscale_outputs; ++i) {
            const int bi = cfg.num_blocks - cfg.n_multiscale_outputs + i;
            g.heads_.push_back(nn::Conv2d<S>::create(rng, cfg.channel_schedule[bi + 1], 3, 1, true));
        }
        return g;
    }

    GeneratorOutput<S> generate(const LatentBatch<S>& z) const {
        const Shape zs = z.values.shape;
        check_arg(zs.c == kLatentChannels && zs.h == cfg_.noise_h && zs.w == cfg_.noise_w,
                  "generate: latent shape " + zs.str() + " does not match config");
        GeneratorOutput<S> out;
        Var<S> h = input_.forward(Var<S>::constant(z.values));
        const int first_head = cfg_.num_blocks - cfg_.n_multiscale_outputs;
        for (int i = 0; i < cfg_.num_blocks; ++i) {
            Var<S> next, dr;
            blocks_[i].forward(h, next, dr);
            h = next;
            out.dr_features.push_back(dr);
            if (i >= first_head)
                out.intermediate_images.push_back(ops::tanh_op(heads_[i - first_head].forward(h)));
        }
        out.final_image = out.intermediate_images.back();
        return out;
    }

    void power_iteration(int steps = 1) {
        input_.power_iteration(steps);
        for (auto& b : blocks_) {
            b.conv1.power_iteration(steps);
            b.conv2.power_iteration(steps);
            b.skip.power_iteration(steps);
        }
        for (auto& hd : heads_) hd.power_iteration(steps);
    }

    std::vector<nn::NamedParam<S>> params(const std::string& prefix = "g") {
        std::vector<nn::NamedParam<S>> out;
        input_.params(prefix + ".in", out);
        for (size_t i = 0; i < blocks_.size(); ++i) {
            const std::string p = prefix + ".block" + std::to_string(i);
            blocks_[i].conv1.params(p + ".conv1", out);
            blocks_[i].conv2.params(p + ".conv2", out);
            blocks_[i].skip.params(p + ".skip", out);
        }
        for (size_t i = 0; i < heads_.size(); ++i)
            heads_[i].params(prefix + ".head" + std::to_string(i), out);
        return out;
    }

    std::vector<std::pair<std::string, nn::VecX<S>*>> sn_state(const std::string& prefix = "g") {
        std::vector<std::pair<std::string, nn::VecX<S>*>> out;
        input_.sn_state(prefix + ".in", out);
        for (size_t i = 0; i < blocks_.size(); ++i) {
            const std::string p = prefix + ".block" + std::to_string(i);
            blocks_[i].conv1.sn_state(p + ".conv1", out);
            blocks_[i].conv2.sn_state(p + ".conv2", out);
            blocks_[i].skip.sn_state(p + ".skip", out);
        }
        for (size_t i = 0; i < heads_.size(); ++i)
            heads_[i].sn_state(prefix + ".head" + std::to_string(i), out);
        return out;
    }

    /// Every spectral conv, for norm checks.
    std::vector<nn::Conv2d<S>*> convs() {
        std::vector<nn::Conv2d<S>*> out = {&input_};
        for (auto& b : blocks_) {
            out.push_back(&b.conv1);
            out.push_back(&b.conv2);
            out.push_back(&b.skip);
        }
        for (auto& hd : heads_) out.push_back(&hd);
        return out;
    }

    const GeneratorConfig& config() const { return cfg_; }

private:
    GeneratorConfig cfg_;
    nn::Conv2d<S> input_;
    std::vector<GenBlock<S>> blocks_;
    std::vector<nn::Conv2d<S>> heads_;
};

}  // namespace sivgan

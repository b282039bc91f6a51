// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sivgan/discriminator.hpp"
#include "sivgan/ops.hpp"

namespace sivgan {

/// Diversity regularization weight and the space it measures distances in.
struct DRConfig {
    double lambda = 0.15;
    enum class Space { feature, image } space = Space::feature;
};

inline const std::vector<double>& dr_lambda_presets() {
    static const std::vector<double> presets = {0.00, 0.05, 0.15, 0.50};
    return presets;
}

/// Which adversarial parts participate in the objective. Disabled parts are
/// excluded from the loss graph entirely, so their head gradients vanish.
struct LossFlags {
    bool content = true;
    bool layout = true;
    bool low_level = true;
};

struct LossBreakdown {
    std::map<std::string, std::vector<double>> per_block;  // keys: low_level, content, layout
    std::map<std::string, double> per_part;
    double adv_total = 0;
    double dr = 0;
    double g_total = 0;
    double d_total = 0;

    /// Structural identities. The default tolerance suits double-precision
    /// graphs; values recorded from a single-precision graph carry rounding
    /// of order 1e-7, so pass a wider tolerance there.
    void check(double tol = 1e-9) const {
        for (const auto& [part, blocks] : per_block) {
            check_arg(!blocks.empty(), "LossBreakdown: empty block list for " + part);
            double mean = 0;
            for (double b : blocks) mean += b;
            mean /= double(blocks.size());
            check_arg(std::abs(mean - per_part.at(part)) <= tol, "LossBreakdown: per_part mismatch for " + part);
        }
        const double total =
            per_part.at("content") + per_part.at("layout") + 2.0 * per_part.at("low_level");
        check_arg(std::abs(total - adv_total) <= tol, "LossBreakdown: adv_total mismatch");
    }
};

template <typename S>
Var<S> bce_block_loss(const Var<S>& logit_map, bool target_real) {
    return ops::bce_with_logits(logit_map, target_real);
}

inline double part_loss(const std::vector<double>& block_losses) {
    check_arg(!block_losses.empty(), "part_loss: empty block list");
    double acc = 0;
    for (double b : block_losses) acc += b;
    return acc / double(block_losses.size());
}

template <typename S>
Var<S> part_loss(const std::vector<Var<S>>& block_losses) {
    check_arg(!block_losses.empty(), "part_loss: empty block list");
    Var<S> acc = block_losses[0];
    for (size_t i = 1; i < block_losses.size(); ++i) acc = ops::add(acc, block_losses[i]);
    return ops::scale(acc, 1.0 / double(block_losses.size()));
}

inline double adversarial_total(double content, double layout, double low_level) {
    return content + layout + 2.0 * low_level;
}

template <typename S>
Var<S> adversarial_total(const Var<S>& content, const Var<S>& layout, const Var<S>& low_level) {
    return ops::add(ops::add(content, layout), ops::scale(low_level, 2.0));
}

/// Mean L1 feature distance between two generations, averaged per element
/// within each layer and then across layers.
template <typename S>
Var<S> diversity_regularization(const std::vector<Var<S>>& feats_z1, const std::vector<Var<S>>& feats_z2,
                                DRConfig::Space space = DRConfig::Space::feature) {
    check_arg(!feats_z1.empty() && feats_z1.size() == feats_z2.size(),
              "diversity_regularization: layer lists must be non-empty and equal length");
    if (space == DRConfig::Space::image)
        check_arg(feats_z1.size() == 1, "diversity_regularization: image space expects the final image only");
    Var<S> acc = ops::mean_abs_diff(feats_z1[0], feats_z2[0]);
    for (size_t l = 1; l < feats_z1.size(); ++l)
        acc = ops::add(acc, ops::mean_abs_diff(feats_z1[l], feats_z2[l]));
    return ops::scale(acc, 1.0 / double(feats_z1.size()));
}

/// Disjoint random index pairs covering the batch (floor(batch/2) of them).
inline std::vector<std::pair<int, int>> pair_latents(int batch, Rng& rng) {
    check_arg(batch >= 2, "pair_latents: batch must be >= 2");
    std::vector<int> idx(batch);
    for (int i = 0; i < batch; ++i) idx[i] = i;
    rng.shuffle(idx);
    std::vector<std::pair<int, int>> pairs;
    for (int k = 0; k + 1 < batch; k += 2)
        pairs.push_back({std::min(idx[k], idx[k + 1]), std::max(idx[k], idx[k + 1])});
    return pairs;
}

namespace detail {

template <typename S>
struct PartTerms {
    std::vector<Var<S>> blocks;
    Var<S> part;
};

template <typename S>
PartTerms<S> part_terms(const std::vector<Var<S>>& logits_a, bool target_a,
                        const std::vector<Var<S>>* logits_b, bool target_b) {
    PartTerms<S> t;
    for (size_t l = 0; l < logits_a.size(); ++l) {
        Var<S> b = bce_block_loss(logits_a[l], target_a);
        if (logits_b) b = ops::add(b, bce_block_loss((*logits_b)[l], target_b));
        t.blocks.push_back(b);
    }
    t.part = part_loss(t.blocks);
    return t;
}

template <typename S>
void record_part(LossBreakdown* bd, const std::string& name, const PartTerms<S>* terms, size_t n_blocks) {
    if (!bd) return;
    auto& blocks = bd->per_block[name];
    if (terms) {
        for (const auto& b : terms->blocks) blocks.push_back(double(b.value().data[0]));
        bd->per_part[name] = double(terms->part.value().data[0]);
    } else {
        blocks.assign(n_blocks, 0.0);
        bd->per_part[name] = 0.0;
    }
}

template <typename S>
Var<S> combine_parts(const PartTerms<S>* content, const PartTerms<S>* layout, const PartTerms<S>* low) {
    check_arg(content || layout || low, "adversarial objective: every part is disabled");
    Var<S> total;
    bool has = false;
    auto fold = [&](const PartTerms<S>* t, double w) {
        if (!t) return;
        Var<S> term = w == 1.0 ? t->part : ops::scale(t->part, w);
        total = has ? ops::add(total, term) : term;
        has = true;
    };
    fold(content, 1.0);
    fold(layout, 1.0);
    fold(low, 2.0);
    return total;
}

}  // namespace detail

/// Discriminator side: per block, BCE of real logits toward 1 plus BCE of
/// fake logits toward 0; parts averaged over blocks and combined with the
/// doubled low-level weight.
template <typename S>
Var<S> discriminator_objective(const DiscriminatorDecision<S>& real, const DiscriminatorDecision<S>& fake,
                               const LossFlags& flags = {}, LossBreakdown* bd = nullptr) {
    using detail::PartTerms;
    std::optional<PartTerms<S>> c, l, low;
    if (flags.content) c = detail::part_terms<S>(real.content, true, &fake.content, false);
    if (flags.layout) l = detail::part_terms<S>(real.layout, true, &fake.layout, false);
    if (flags.low_level) low = detail::part_terms<S>(real.low_level, true, &fake.low_level, false);
    detail::record_part(bd, "content", c ? &*c : nullptr, real.content.size());
    detail::record_part(bd, "layout", l ? &*l : nullptr, real.layout.size());
    detail::record_part(bd, "low_level", low ? &*low : nullptr, real.low_level.size());
    Var<S> total = detail::combine_parts(c ? &*c : nullptr, l ? &*l : nullptr, low ? &*low : nullptr);
    if (bd) {
        bd->adv_total = double(total.value().data[0]);
        bd->d_total = bd->adv_total;
    }
    return total;
}

/// Generator side: non-saturating adversarial term (fake logits scored
/// against the real target) minus lambda times the diversity term.
template <typename S>
Var<S> generator_objective(const DiscriminatorDecision<S>& fake, const Var<S>* dr, const DRConfig& cfg,
                           const LossFlags& flags = {}, LossBreakdown* bd = nullptr) {
    using detail::PartTerms;
    std::optional<PartTerms<S>> c, l, low;
    if (flags.content) c = detail::part_terms<S>(fake.content, true, nullptr, false);
    if (flags.layout) l = detail::part_terms<S>(fake.layout, true, nullptr, false);
    if (flags.low_level) low = detail::part_terms<S>(fake.low_level, true, nullptr, false);
    Var<S> adv = detail::combine_parts(c ? &*c : nullptr, l ? &*l : nullptr, low ? &*low : nullptr);
    Var<S> total = adv;
    if (dr && cfg.lambda != 0.0) total = ops::sub(total, ops::scale(*dr, cfg.lambda));
    if (bd) {
        bd->dr = dr ? double(dr->value().data[0]) : 0.0;
        bd->g_total = double(total.value().data[0]);
    }
    return total;
}

}  // namespace sivgan

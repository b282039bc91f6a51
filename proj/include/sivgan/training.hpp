// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "sivgan/checkpoint.hpp"
#include "sivgan/data.hpp"
#include "sivgan/generator.hpp"
#include "sivgan/losses.hpp"

namespace sivgan {

struct AblationFlags {
    bool no_content_branch = false;
    bool no_layout_branch = false;
    bool no_fa = false;
    bool no_dr = false;
    bool no_low_level_loss = false;
    bool dr_image_space = false;
};

struct TrainingConfig {
    int iterations = 100000;
    double lr_g = 2e-4, lr_d = 2e-4;
    double adam_beta1 = 0.5, adam_beta2 = 0.999;
    int batch_size = 5;
    double lambda_dr = 0.15;
    std::uint64_t seed = 0;
    int checkpoint_every = 5000;
    int target_h = 0, target_w = 0;
    FeatureAugConfig fa;
    ImageAugConfig da;
    AblationFlags ablations;
    GeneratorConfig gen;
    DiscriminatorConfig disc;

    void validate() const {
        if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
        if (lr_g <= 0 || lr_d <= 0) throw ConfigError("learning rates must be positive");
        if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
        if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be >= 1");
        if (ablations.no_content_branch && ablations.no_layout_branch && ablations.no_low_level_loss)
            throw ConfigError("every adversarial part is ablated; nothing to train");
        gen.validate();
        disc.validate();
        if (gen.n_multiscale_outputs != disc.n_multiscale_inputs)
            throw ConfigError("gen.n_multiscale must equal the discriminator's multiscale input count");
        if (target_h != gen.out_h() || target_w != gen.out_w())
            throw ConfigError("target size " + std::to_string(target_w) + "x" + std::to_string(target_h) +
                              " does not match generator output " + std::to_string(gen.out_w()) + "x" +
                              std::to_string(gen.out_h()));
    }
};

struct StepResult {
    LossBreakdown losses;
    bool fa_fired = false;            // plan gate for this step's real pass
    std::int64_t fa_real_applies = 0; // discriminate calls that mixed features, real pass
    std::int64_t fa_fake_applies = 0; // same, fake passes (must stay 0)
};

template <typename S>
class Trainer {
public:
    static Trainer create(const TrainingConfig& cfg,
                          std::map<std::string, std::string> config_snapshot = {}) {
        cfg.validate();
        Trainer t;
        t.cfg_ = cfg;
        t.config_snapshot_ = std::move(config_snapshot);
        Rng grng(stream_seed(cfg.seed, Stream::init_g));
        Rng drng(stream_seed(cfg.seed, Stream::init_d));
        t.g_ = Generator<S>::build(cfg.gen, grng);
        t.d_ = Discriminator<S>::build(cfg.disc, drng);
        t.gp_ = t.g_.params();
        t.dp_ = t.d_.params();
        t.opt_g_ = nn::Adam<S>(cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2);
        t.opt_d_ = nn::Adam<S>(cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2);
        return t;
    }

    /// One discriminator update then one generator update on the given real
    /// batch (already at training resolution, values in [-1, 1]).
    StepResult train_step(const TensorF& real_batch) {
        const int it = iter_;
        const int n_levels = cfg_.disc.n_multiscale_inputs;
        StepResult res;
        LossFlags flags;
        flags.content = !cfg_.ablations.no_content_branch;
        flags.layout = !cfg_.ablations.no_layout_branch;
        flags.low_level = !cfg_.ablations.no_low_level_loss;

        check_arg(real_batch.shape.n == cfg_.batch_size && real_batch.shape.c == 3 &&
                      real_batch.shape.h == cfg_.target_h && real_batch.shape.w == cfg_.target_w,
                  "train_step: real batch shape " + real_batch.shape.str() + " does not match config");

        g_.power_iteration(1);
        d_.power_iteration(1);

        // --- discriminator update ---
        Rng da_real_rng(stream_seed(cfg_.seed, Stream::da_real, it));
        Var<S> real = Var<S>::constant(real_batch.template cast<S>());
        real = differentiable_augment(real, sample_image_aug_params(da_real_rng, cfg_.batch_size, cfg_.da));
        std::vector<Var<S>> real_pyr = build_image_pyramid(real, n_levels);

        std::vector<Var<S>> fake_pyr_d;
        {
            NoGradScope ng;  // fakes are constants in the discriminator update
            auto z = sample_latent<S>(stream_seed(cfg_.seed, Stream::z_d, it), cfg_.batch_size, cfg_.gen);
            GeneratorOutput<S> out = g_.generate(z);
            Rng da_rng(stream_seed(cfg_.seed, Stream::da_fake_d, it));
            const ImageAugParams da = sample_image_aug_params(da_rng, cfg_.batch_size, cfg_.da);
            for (auto& img : out.intermediate_images)
                fake_pyr_d.push_back(differentiable_augment(img, da));
        }

        FeatureAugPlan fa_plan;
        if (!cfg_.ablations.no_fa) {
            Rng fa_rng(stream_seed(cfg_.seed, Stream::fa, it));
            const int fh = cfg_.target_h >> cfg_.disc.n_low_level;
            const int fw = cfg_.target_w >> cfg_.disc.n_low_level;
            fa_plan = sample_feature_aug_plan(fa_rng, cfg_.batch_size, std::max(1, fh), std::max(1, fw),
                                              cfg_.disc.channel_schedule.back(), cfg_.fa);
        }
        res.fa_fired = fa_plan.apply;

        std::int64_t fa_before = d_.fa_apply_count();
        DiscriminatorDecision<S> dec_real = d_.discriminate(real_pyr, &fa_plan);
        res.fa_real_applies = d_.fa_apply_count() - fa_before;
        fa_before = d_.fa_apply_count();
        DiscriminatorDecision<S> dec_fake = d_.discriminate(fake_pyr_d);
        res.fa_fake_applies = d_.fa_apply_count() - fa_before;

        Var<S> d_obj = discriminator_objective(dec_real, dec_fake, flags, &res.losses);
        nn::zero_grads(dp_);
        backward(d_obj);
        opt_d_.step(dp_);

        // --- generator update ---
        set_trainable(dp_, false);  // no need to backpropagate into D weights here
        auto zg = sample_latent<S>(stream_seed(cfg_.seed, Stream::z_g, it), cfg_.batch_size, cfg_.gen);
        GeneratorOutput<S> gout = g_.generate(zg);
        Rng da_g_rng(stream_seed(cfg_.seed, Stream::da_fake_g, it));
        const ImageAugParams da_g = sample_image_aug_params(da_g_rng, cfg_.batch_size, cfg_.da);
        std::vector<Var<S>> fake_pyr_g;
        for (auto& img : gout.intermediate_images) fake_pyr_g.push_back(differentiable_augment(img, da_g));

        fa_before = d_.fa_apply_count();
        DiscriminatorDecision<S> dec_g = d_.discriminate(fake_pyr_g);
        res.fa_fake_applies += d_.fa_apply_count() - fa_before;

        DRConfig dr_cfg;
        dr_cfg.lambda = cfg_.lambda_dr;
        dr_cfg.space = cfg_.ablations.dr_image_space ? DRConfig::Space::image : DRConfig::Space::feature;
        std::optional<Var<S>> dr;
        if (!cfg_.ablations.no_dr) {
            Rng pair_rng(stream_seed(cfg_.seed, Stream::pairs, it));
            const auto pairs = pair_latents(cfg_.batch_size, pair_rng);
            Var<S> acc;
            for (size_t k = 0; k < pairs.size(); ++k) {
                const auto [i, j] = pairs[k];
                std::vector<Var<S>> f1, f2;
                if (dr_cfg.space == DRConfig::Space::image) {
                    f1.push_back(ops::select_sample(gout.final_image, i));
                    f2.push_back(ops::select_sample(gout.final_image, j));
                } else {
                    for (const auto& f : gout.dr_features) {
                        f1.push_back(ops::select_sample(f, i));
                        f2.push_back(ops::select_sample(f, j));
                    }
                }
                Var<S> term = diversity_regularization(f1, f2, dr_cfg.space);
                acc = k == 0 ? term : ops::add(acc, term);
            }
            dr = ops::scale(acc, 1.0 / double(pairs.size()));
        }

        Var<S> g_obj = generator_objective(dec_g, dr ? &*dr : nullptr, dr_cfg, flags, &res.losses);
        nn::zero_grads(gp_);
        backward(g_obj);
        opt_g_.step(gp_);
        set_trainable(dp_, true);

        check_finite(res.losses, it);
        ++iter_;
        return res;
    }

    Checkpoint snapshot() {
        Checkpoint ck;
        ck.iteration = iter_;
        ck.root_seed = cfg_.seed;
        ck.adam_g_t = opt_g_.t();
        ck.adam_d_t = opt_d_.t();
        ck.config = config_snapshot_;
        auto add_params = [&ck](const std::vector<nn::NamedParam<S>>& ps) {
            for (const auto& p : ps) {
                const Shape s = p.var.shape();
                std::vector<float> data(p.var.value().data.size());
                for (size_t i = 0; i < data.size(); ++i) data[i] = float(p.var.value().data[i]);
                ck.add(p.name, {s.n, s.c, s.h, s.w}, std::move(data));
            }
        };
        add_params(gp_);
        add_params(dp_);
        auto add_adam = [&ck](const char* tag, nn::Adam<S>& opt) {
            for (const auto& [name, slot] : opt.slots()) {
                std::vector<float> m(slot.m.size()), v(slot.v.size());
                for (std::int64_t i = 0; i < slot.m.size(); ++i) m[i] = float(slot.m[i]);
                for (std::int64_t i = 0; i < slot.v.size(); ++i) v[i] = float(slot.v[i]);
                ck.add(std::string(tag) + "." + name + ".m", {slot.m.size()}, std::move(m));
                ck.add(std::string(tag) + "." + name + ".v", {slot.v.size()}, std::move(v));
            }
        };
        add_adam("opt_g", opt_g_);
        add_adam("opt_d", opt_d_);
        auto add_sn = [&ck](std::vector<std::pair<std::string, nn::VecX<S>*>> vs) {
            for (auto& [name, vec] : vs) {
                std::vector<float> data(vec->size());
                for (std::int64_t i = 0; i < vec->size(); ++i) data[i] = float((*vec)[i]);
                ck.add("sn." + name, {vec->size()}, std::move(data));
            }
        };
        add_sn(g_.sn_state());
        add_sn(d_.sn_state());
        ck.sort_blobs();
        return ck;
    }

    void restore(const Checkpoint& ck) {
        if (ck.root_seed != cfg_.seed)
            throw CheckpointError("checkpoint seed " + std::to_string(ck.root_seed) +
                                  " does not match configured seed " + std::to_string(cfg_.seed));
        size_t used = 0;
        auto take = [&ck, &used](const std::string& name, std::int64_t want) -> const CheckpointBlob& {
            const CheckpointBlob* b = ck.find(name);
            if (!b) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
            if (b->numel() != want)
                throw CheckpointError("checkpoint tensor '" + name + "' has " + std::to_string(b->numel()) +
                                      " values, expected " + std::to_string(want));
            ++used;
            return *b;
        };
        for (auto* ps : {&gp_, &dp_}) {
            for (auto& p : *ps) {
                const auto& b = take(p.name, p.var.shape().numel());
                for (size_t i = 0; i < b.data.size(); ++i) p.var.value().data[i] = S(b.data[i]);
            }
        }
        auto load_adam = [&ck, &take](const char* tag, nn::Adam<S>& opt,
                                      const std::vector<nn::NamedParam<S>>& ps, std::int64_t t) {
            opt.set_t(t);
            opt.slots().clear();
            for (const auto& p : ps) {
                const std::string base = std::string(tag) + "." + p.name;
                if (!ck.find(base + ".m")) continue;  // parameter had no updates yet at snapshot time
                const auto& m = take(base + ".m", p.var.shape().numel());
                const auto& v = take(base + ".v", p.var.shape().numel());
                auto& slot = opt.slots()[p.name];
                slot.m.resize(m.data.size());
                slot.v.resize(v.data.size());
                for (size_t i = 0; i < m.data.size(); ++i) slot.m[i] = S(m.data[i]);
                for (size_t i = 0; i < v.data.size(); ++i) slot.v[i] = S(v.data[i]);
            }
        };
        load_adam("opt_g", opt_g_, gp_, ck.adam_g_t);
        load_adam("opt_d", opt_d_, dp_, ck.adam_d_t);
        auto load_sn = [&take](std::vector<std::pair<std::string, nn::VecX<S>*>> vs) {
            for (auto& [name, vec] : vs) {
                const auto& b = take("sn." + name, vec->size());
                for (std::int64_t i = 0; i < vec->size(); ++i) (*vec)[i] = S(b.data[i]);
            }
        };
        load_sn(g_.sn_state());
        load_sn(d_.sn_state());
        iter_ = ck.iteration;
        if (used != ck.blobs.size())
            throw CheckpointError("checkpoint has " + std::to_string(ck.blobs.size() - used) +
                                  " unrecognized tensors (model shape mismatch?)");
    }

    int iteration() const { return iter_; }
    const TrainingConfig& config() const { return cfg_; }
    const std::map<std::string, std::string>& config_snapshot() const { return config_snapshot_; }
    Generator<S>& generator() { return g_; }
    Discriminator<S>& discriminator() { return d_; }
    nn::Adam<S>& opt_g() { return opt_g_; }
    nn::Adam<S>& opt_d() { return opt_d_; }

private:
    static void set_trainable(std::vector<nn::NamedParam<S>>& ps, bool on) {
        for (auto& p : ps) p.var.set_requires_grad(on);
    }

    static void check_finite(const LossBreakdown& bd, int it) {
        const double vals[] = {bd.d_total, bd.g_total, bd.adv_total, bd.dr};
        bool ok = true;
        for (double v : vals) ok = ok && std::isfinite(v);
        for (const auto& [part, blocks] : bd.per_block)
            for (double b : blocks) ok = ok && std::isfinite(b);
        if (ok) return;
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "non-finite loss at iteration %d: d_total=%g g_total=%g adv=%g dr=%g "
                      "(low=%g content=%g layout=%g)",
                      it, bd.d_total, bd.g_total, bd.adv_total, bd.dr,
                      bd.per_part.count("low_level") ? bd.per_part.at("low_level") : 0.0,
                      bd.per_part.count("content") ? bd.per_part.at("content") : 0.0,
                      bd.per_part.count("layout") ? bd.per_part.at("layout") : 0.0);
        throw NumericError(buf);
    }

    TrainingConfig cfg_;
    std::map<std::string, std::string> config_snapshot_;
    Generator<S> g_;
    Discriminator<S> d_;
    std::vector<nn::NamedParam<S>> gp_, dp_;
    nn::Adam<S> opt_g_, opt_d_;
    int iter_ = 0;
};

/// Deterministic batch source: batch i depends only on (seed, i), so workers
/// can build batches ahead of the training loop without reordering risk.
class BatchProducer {
public:
    BatchProducer(const TrainingSource& src, const BatchSpec& spec, std::uint64_t root_seed,
                  int first_iter, int last_iter, int workers)
        : src_(src), spec_(spec), seed_(root_seed), next_produce_(first_iter), last_(last_iter) {
        // sources are pre-resized by the caller when possible; single-image
        // batches never consume randomness, so one shared batch suffices
        if (src_.kind == SourceKind::single_image) {
            Rng rng(0);
            fixed_ = make_batch(src_, spec_, rng);
            return;
        }
        for (int i = 0; i < workers; ++i)
            threads_.emplace_back([this] { work(); });
    }

    ~BatchProducer() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    TensorF get(int iter) {
        if (src_.kind == SourceKind::single_image) return fixed_;
        if (threads_.empty()) {
            Rng rng(stream_seed(seed_, Stream::batch, std::uint64_t(iter)));
            return make_batch(src_, spec_, rng);
        }
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return ready_.count(iter) > 0; });
        TensorF b = std::move(ready_.at(iter));
        ready_.erase(iter);
        cv_.notify_all();
        return b;
    }

private:
    void work() {
        for (;;) {
            int iter;
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || (next_produce_ <= last_ && ready_.size() < kAhead); });
                if (stop_) return;
                iter = next_produce_++;
            }
            Rng rng(stream_seed(seed_, Stream::batch, std::uint64_t(iter)));
            TensorF b = make_batch(src_, spec_, rng);
            {
                std::lock_guard<std::mutex> lk(mu_);
                ready_.emplace(iter, std::move(b));
            }
            cv_.notify_all();
        }
    }

    static constexpr size_t kAhead = 8;
    const TrainingSource& src_;
    BatchSpec spec_;
    std::uint64_t seed_;
    int next_produce_ = 0, last_ = 0;
    TensorF fixed_;
    std::vector<std::thread> threads_;
    std::map<int, TensorF> ready_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool stop_ = false;
};

inline int env_num_workers() {
    const char* s = std::getenv("SIV_NUM_WORKERS");
    if (!s) return 0;
    const int n = std::atoi(s);
    return std::max(0, std::min(n, 16));
}

struct TrainHooks {
    std::function<void(int iter, const StepResult&)> on_step;
    std::function<void(int iter)> on_checkpoint;  // called at every checkpoint_every boundary
};

/// Runs the trainer from its current iteration up to `iterations`, pulling
/// batches from a deterministic producer.
template <typename S>
void train(Trainer<S>& trainer, const TrainingSource& src, const TrainHooks& hooks = {}) {
    const TrainingConfig& cfg = trainer.config();
    // resize once up front so batch assembly is a copy
    TrainingSource resized;
    resized.kind = src.kind;
    resized.native_h = cfg.target_h;
    resized.native_w = cfg.target_w;
    for (const auto& img : src.images)
        resized.images.push_back(resize_bilinear(img, cfg.target_h, cfg.target_w));
    BatchSpec spec{cfg.batch_size, cfg.target_h, cfg.target_w};
    BatchProducer producer(resized, spec, cfg.seed, trainer.iteration(), cfg.iterations - 1,
                           env_num_workers());
    while (trainer.iteration() < cfg.iterations) {
        const int it = trainer.iteration();
        const TensorF batch = producer.get(it);
        StepResult res = trainer.train_step(batch);
        if (hooks.on_step) hooks.on_step(it, res);
        if (hooks.on_checkpoint && (it + 1) % cfg.checkpoint_every == 0) hooks.on_checkpoint(it + 1);
    }
}

}  // namespace sivgan

// SPDX-License-Identifier: Apache-2.0
// Command-line entry point: train, generate, evaluate, inspect.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sivgan/config.hpp"
#include "sivgan/evaluation.hpp"
#include "sivgan/training.hpp"

namespace fs = std::filesystem;
using namespace sivgan;

namespace {

std::string config_help() {
    std::string out = "Config keys (key=value lines, # comments):\n";
    for (const auto& k : config_registry()) {
        char line[160];
        std::snprintf(line, sizeof(line), "  %-28s default %-12s %s\n", k.key, k.def, k.desc);
        out += line;
    }
    return out;
}

/// Fills the auto (0) keys: training resolution, noise shape, iteration count.
/// The training resolution is snapped to the generator's reachable output
/// size when the noise shape is chosen automatically.
RunConfig resolve_config(RunConfig rc, const TrainingSource& src) {
    int th = rc.get_int("train.target_h");
    int tw = rc.get_int("train.target_w");
    int h0 = rc.get_int("gen.noise_h");
    int w0 = rc.get_int("gen.noise_w");
    int nb = rc.get_int("gen.num_blocks");
    const bool pinned = h0 != 0 || w0 != 0 || nb != 0;
    if (pinned) {
        if (h0 < 1 || w0 < 1 || nb < 1)
            throw ConfigError("gen.noise_h, gen.noise_w and gen.num_blocks must be set together");
        if (th == 0) th = h0 << nb;
        if (tw == 0) tw = w0 << nb;
    } else {
        if (th == 0) th = src.native_h;
        if (tw == 0) tw = src.native_w;
        select_noise_shape(th, tw, h0, w0, nb);
        th = h0 << nb;
        tw = w0 << nb;
    }
    rc.set("train.target_h", std::to_string(th));
    rc.set("train.target_w", std::to_string(tw));
    rc.set("gen.noise_h", std::to_string(h0));
    rc.set("gen.noise_w", std::to_string(w0));
    rc.set("gen.num_blocks", std::to_string(nb));
    if (rc.get_int("train.iterations") == 0)
        rc.set("train.iterations", src.kind == SourceKind::single_image ? "100000" : "300000");
    return rc;
}

/// A resolved RunConfig (no auto keys left) mapped onto module configs.
TrainingConfig to_training_config(const RunConfig& rc) {
    TrainingConfig tc;
    tc.iterations = rc.get_int("train.iterations");
    tc.lr_g = rc.get_double("train.lr_g");
    tc.lr_d = rc.get_double("train.lr_d");
    tc.adam_beta1 = rc.get_double("train.adam_beta1");
    tc.adam_beta2 = rc.get_double("train.adam_beta2");
    tc.batch_size = rc.get_int("train.batch_size");
    tc.lambda_dr = rc.get_double("loss.lambda_dr");
    tc.seed = std::uint64_t(rc.get_int("train.seed"));
    tc.checkpoint_every = rc.get_int("train.checkpoint_every");
    tc.target_h = rc.get_int("train.target_h");
    tc.target_w = rc.get_int("train.target_w");
    tc.fa.p_fa = rc.get_double("aug.p_fa");
    tc.fa.rect_area_lo = rc.get_double("aug.fa_rect_area_lo");
    tc.fa.rect_area_hi = rc.get_double("aug.fa_rect_area_hi");
    tc.fa.rect_aspect_lo = rc.get_double("aug.fa_rect_aspect_lo");
    tc.fa.rect_aspect_hi = rc.get_double("aug.fa_rect_aspect_hi");
    tc.fa.mix_frac_lo = rc.get_double("aug.fa_mix_lo");
    tc.fa.mix_frac_hi = rc.get_double("aug.fa_mix_hi");
    tc.fa.drop_frac_lo = rc.get_double("aug.fa_drop_lo");
    tc.fa.drop_frac_hi = rc.get_double("aug.fa_drop_hi");
    tc.da.p_da = rc.get_double("aug.p_da");
    tc.da.max_translate = rc.get_double("aug.da_max_translate");
    tc.da.crop_scale_lo = rc.get_double("aug.da_crop_lo");
    tc.da.crop_scale_hi = rc.get_double("aug.da_crop_hi");
    tc.da.max_rotate_deg = rc.get_double("aug.da_max_rotate");
    tc.ablations.no_content_branch = rc.get_bool("ablation.no_content_branch");
    tc.ablations.no_layout_branch = rc.get_bool("ablation.no_layout_branch");
    tc.ablations.no_fa = rc.get_bool("ablation.no_fa");
    tc.ablations.no_dr = rc.get_bool("ablation.no_dr");
    tc.ablations.no_low_level_loss = rc.get_bool("ablation.no_low_level_loss");
    tc.ablations.dr_image_space = rc.get_bool("ablation.dr_image_space");
    tc.gen.noise_h = rc.get_int("gen.noise_h");
    tc.gen.noise_w = rc.get_int("gen.noise_w");
    tc.gen.num_blocks = rc.get_int("gen.num_blocks");
    tc.gen.n_multiscale_outputs = rc.get_int("gen.n_multiscale");
    tc.gen.channel_schedule = default_channel_schedule(tc.gen.num_blocks, rc.get_double("gen.width_mult"));
    tc.disc.n_low_level = rc.get_int("disc.n_low_level");
    tc.disc.n_branch = rc.get_int("disc.n_branch");
    tc.disc.layout_channels = rc.get_int("disc.layout_channels");
    tc.disc.n_multiscale_inputs = tc.gen.n_multiscale_outputs;
    tc.disc.channel_schedule = default_disc_schedule(tc.disc.n_low_level, rc.get_double("disc.width_mult"));
    return tc;
}

RunConfig load_run_config(const std::string& path, std::int64_t seed_flag) {
    RunConfig rc = path.empty() ? RunConfig() : RunConfig::from_file(path);
    if (seed_flag >= 0) rc.set("train.seed", std::to_string(seed_flag));
    return rc;
}

RunConfig config_from_snapshot(const std::map<std::string, std::string>& snap) {
    RunConfig rc;
    for (const auto& [k, v] : snap) rc.set(k, v);
    return rc;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

std::vector<TensorF> generate_images(Trainer<float>& trainer, int n, std::uint64_t seed) {
    NoGradScope ng;
    const TrainingConfig& tc = trainer.config();
    std::vector<TensorF> out;
    for (int done = 0, batch_idx = 0; done < n; ++batch_idx) {
        auto z = sample_latent<float>(stream_seed(seed, Stream::z_g, std::uint64_t(batch_idx)),
                                      tc.batch_size, tc.gen);
        GeneratorOutput<float> g = trainer.generator().generate(z);
        const TensorF& img = g.final_image.value();
        for (int i = 0; i < tc.batch_size && done < n; ++i, ++done) {
            TensorF one(Shape{1, img.shape.c, img.shape.h, img.shape.w});
            one.data = img.data.segment(img.index(i, 0, 0, 0), one.numel());
            out.push_back(std::move(one));
        }
    }
    return out;
}

Trainer<float> trainer_from_checkpoint(const Checkpoint& ck) {
    if (ck.config.empty()) throw CheckpointError("checkpoint carries no config snapshot");
    RunConfig rc = config_from_snapshot(ck.config);
    Trainer<float> t = Trainer<float>::create(to_training_config(rc), ck.config);
    t.restore(ck);
    return t;
}

int cmd_train(const std::string& config_path, const std::string& source_path,
              const std::string& out_dir, std::int64_t seed_flag, const std::string& resume_path) {
    RunConfig rc = load_run_config(config_path, seed_flag);
    TrainingSource src = load_source(source_path, parse_source_kind(rc.get("source.kind")));
    rc = resolve_config(std::move(rc), src);
    TrainingConfig tc = to_training_config(rc);

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "config.txt", rc.echo());

    Trainer<float> trainer = Trainer<float>::create(tc, rc.map());
    if (!resume_path.empty()) trainer.restore(Checkpoint::load(resume_path));

    std::ofstream csv;
    const fs::path csv_path = fs::path(out_dir) / "loss.csv";
    if (trainer.iteration() == 0) {
        csv.open(csv_path, std::ios::binary);
        csv << "iter,d_total,g_total,d_low,d_content,d_layout,dr\n";
    } else {
        csv.open(csv_path, std::ios::binary | std::ios::app);
    }

    TrainHooks hooks;
    hooks.on_step = [&csv](int it, const StepResult& res) {
        const LossBreakdown& b = res.losses;
        char line[256];
        std::snprintf(line, sizeof(line), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", it, b.d_total,
                      b.g_total, b.per_part.at("low_level"), b.per_part.at("content"),
                      b.per_part.at("layout"), b.dr);
        csv << line;
    };
    hooks.on_checkpoint = [&](int it) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_%06d.ckpt", it);
        trainer.snapshot().save((fs::path(out_dir) / name).string());
        NoGradScope ng;
        auto z = sample_latent<float>(stream_seed(tc.seed, Stream::eval, std::uint64_t(it)),
                                      std::max(6, tc.batch_size), tc.gen);
        GeneratorOutput<float> g = trainer.generator().generate(z);
        std::snprintf(name, sizeof(name), "grid_%06d.png", it);
        save_png((fs::path(out_dir) / name).string(), montage(g.final_image.value(), 3));
        csv.flush();
    };
    train(trainer, src, hooks);
    if (trainer.iteration() == tc.iterations && tc.iterations % tc.checkpoint_every != 0)
        trainer.snapshot().save((fs::path(out_dir) / "checkpoint_final.ckpt").string());
    return 0;
}

int cmd_generate(const std::string& ckpt_path, int n, std::int64_t seed_flag,
                 const std::string& out_dir) {
    Trainer<float> trainer = trainer_from_checkpoint(Checkpoint::load(ckpt_path));
    const std::uint64_t seed = seed_flag >= 0 ? std::uint64_t(seed_flag) : trainer.config().seed;
    fs::create_directories(out_dir);
    std::vector<TensorF> images = generate_images(trainer, n < 0 ? 100 : n, seed);
    for (size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%05d.png", int(i));
        save_png((fs::path(out_dir) / name).string(), tensor_to_image(images[i]));
    }
    return 0;
}

std::vector<TensorF> load_image_dir(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<TensorF> out;
    for (const auto& p : paths) out.push_back(image_to_tensor(load_image(p)));
    return out;
}

MetricPlugins parse_plugins(const std::string& spec) {
    if (spec == "toy") return make_toy_plugins();
    if (spec.rfind("files:", 0) == 0) return load_file_plugins(spec.substr(6));
    throw PluginError("unknown plugin spec '" + spec + "'; use 'toy' or 'files:<dir>'");
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& images_dir,
                 const std::string& config_path, const std::string& source_path,
                 const std::string& plugin_spec, int n_flag, std::int64_t seed_flag,
                 const std::string& out_dir) {
    RunConfig rc;
    std::vector<TensorF> generated;
    std::uint64_t seed = seed_flag >= 0 ? std::uint64_t(seed_flag) : 0;
    if (!images_dir.empty()) {
        generated = load_image_dir(images_dir);
        if (!config_path.empty()) rc = RunConfig::from_file(config_path);
    } else {
        if (ckpt_path.empty()) throw ConfigError("evaluate needs --checkpoint or --images");
        Trainer<float> trainer = trainer_from_checkpoint(Checkpoint::load(ckpt_path));
        rc = config_from_snapshot(trainer.config_snapshot());
        if (!config_path.empty()) rc = RunConfig::from_file(config_path);
        if (seed_flag < 0) seed = trainer.config().seed;
        const int n = n_flag > 0 ? n_flag : rc.get_int("eval.n_generated");
        generated = generate_images(trainer, n, seed);
    }

    TrainingSource src = load_source(source_path, parse_source_kind(rc.get("source.kind")));
    MetricPlugins plugins = parse_plugins(plugin_spec);
    EvalConfig ec;
    ec.n_generated = int(generated.size());
    ec.aug_pool_size = rc.get_int("eval.aug_pool_size");
    ec.seed = seed;
    ec.da.p_da = rc.get_double("aug.p_da");
    ec.da.max_translate = rc.get_double("aug.da_max_translate");
    ec.da.crop_scale_lo = rc.get_double("aug.da_crop_lo");
    ec.da.crop_scale_hi = rc.get_double("aug.da_crop_hi");
    ec.da.max_rotate_deg = rc.get_double("aug.da_max_rotate");
    MetricReport report = run_evaluation(generated, src, plugins, ec);

    nlohmann::json j;
    for (const auto& [depth, value] : report.sifid) j["sifid." + depth] = value;
    j["diversity_lpips"] = report.diversity_lpips;
    j["dist_to_train"] = report.dist_to_train;
    j["pixel_diversity"] = report.pixel_diversity;
    j["n_generated"] = report.n_generated;

    const char* keys[] = {"sifid.quarter",   "sifid.eighth",  "sifid.sixteenth", "sifid.global",
                          "diversity_lpips", "dist_to_train", "pixel_diversity", "n_generated"};
    std::string header, row;
    for (const char* k : keys) {
        header += header.empty() ? "" : ",";
        row += row.empty() ? "" : ",";
        header += k;
        char num[48];
        std::snprintf(num, sizeof(num), "%.10g", j.at(k).get<double>());
        row += num;
    }

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.json", j.dump(2) + "\n");
    write_text(fs::path(out_dir) / "report.csv", header + "\n" + row + "\n");
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

int cmd_inspect(const std::string& ckpt_path) {
    Checkpoint ck = Checkpoint::load(ckpt_path);
    std::printf("iteration: %lld\n", (long long)ck.iteration);
    std::printf("root_seed: %llu\n", (unsigned long long)ck.root_seed);
    std::printf("adam_steps: g=%lld d=%lld\n", (long long)ck.adam_g_t, (long long)ck.adam_d_t);
    std::printf("config:\n");
    for (const auto& [k, v] : ck.config) std::printf("  %s=%s\n", k.c_str(), v.c_str());
    std::printf("tensors: %zu\n", ck.blobs.size());
    for (const auto& b : ck.blobs) {
        std::printf("  %-40s [", b.name.c_str());
        for (size_t i = 0; i < b.dims.size(); ++i)
            std::printf("%s%lld", i ? "," : "", (long long)b.dims[i]);
        std::printf("]\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SIV-GAN: single image/video GAN training, sampling and evaluation"};
    app.require_subcommand(1);
    app.footer(config_help());

    std::string config_path, source_path, out_dir, ckpt_path, images_dir, resume_path;
    std::string plugin_spec = "toy";
    std::int64_t seed = -1;
    int n = -1;

    auto* t = app.add_subcommand("train", "train a model on a single image or frame directory");
    t->add_option("--config", config_path, "config file (key=value lines)");
    t->add_option("--source", source_path, "training image or frames directory")->required();
    t->add_option("--out", out_dir, "output directory")->required();
    t->add_option("--seed", seed, "override train.seed");
    t->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* g = app.add_subcommand("generate", "sample images from a checkpoint");
    g->footer("");  // no config file input here
    g->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    g->add_option("--out", out_dir, "output directory")->required();
    g->add_option("--n", n, "number of samples (default 100)");
    g->add_option("--seed", seed, "sampling seed (default: training seed)");

    auto* e = app.add_subcommand("evaluate", "compute the metric report for generated images");
    e->add_option("--checkpoint", ckpt_path, "checkpoint to sample from");
    e->add_option("--images", images_dir, "directory of pre-generated images (instead of --checkpoint)");
    e->add_option("--config", config_path, "config file overriding the checkpoint's snapshot");
    e->add_option("--source", source_path, "training image or frames directory")->required();
    e->add_option("--out", out_dir, "output directory")->required();
    e->add_option("--plugins", plugin_spec, "metric networks: 'toy' or 'files:<dir>'");
    e->add_option("--n", n, "samples to generate (default: eval.n_generated)");
    e->add_option("--seed", seed, "sampling seed");

    auto* i = app.add_subcommand("inspect", "print a checkpoint's manifest");
    i->footer("");  // no config file input here
    i->add_option("--checkpoint", ckpt_path, "checkpoint to inspect")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (t->parsed()) return cmd_train(config_path, source_path, out_dir, seed, resume_path);
        if (g->parsed()) return cmd_generate(ckpt_path, n, seed, out_dir);
        if (e->parsed())
            return cmd_evaluate(ckpt_path, images_dir, config_path, source_path, plugin_spec, n, seed,
                                out_dir);
        if (i->parsed()) return cmd_inspect(ckpt_path);
    } catch (const ConfigError& ex) {
        std::fprintf(stderr, "config error: %s\n", ex.what());
        return 2;
    } catch (const CheckpointError& ex) {
        std::fprintf(stderr, "checkpoint error: %s\n", ex.what());
        return 3;
    } catch (const PluginError& ex) {
        std::fprintf(stderr, "plugin error: %s\n", ex.what());
        return 4;
    } catch (const NumericError& ex) {
        std::fprintf(stderr, "numeric abort: %s\n", ex.what());
        return 5;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "sivgan/generator.hpp"
#include "test_util.hpp"

using namespace sivgan;

namespace {
GeneratorConfig tiny_config() {
    GeneratorConfig cfg;
    cfg.noise_h = 2;
    cfg.noise_w = 3;
    cfg.num_blocks = 3;
    cfg.channel_schedule = {8, 8, 6, 4};
    cfg.n_multiscale_outputs = 2;
    return cfg;
}
}  // namespace

TEST_CASE("default channel schedule is non-increasing and scales with width") {
    const auto s = default_channel_schedule(6);
    CHECK(s == std::vector<int>{512, 512, 256, 256, 128, 64, 64});
    for (size_t i = 1; i < s.size(); ++i) CHECK(s[i] <= s[i - 1]);
    const auto h = default_channel_schedule(6, 0.125);
    CHECK(h == std::vector<int>{64, 64, 32, 32, 16, 8, 8});
    const auto deep = default_channel_schedule(8);
    CHECK(deep.size() == 9);
    CHECK(deep[8] == 64);  // extends by repeating the last width
    const auto tiny = default_channel_schedule(3, 0.001);
    for (int c : tiny) CHECK(c >= 1);
}

TEST_CASE("config validation rejects bad schedules") {
    GeneratorConfig cfg = tiny_config();
    cfg.channel_schedule = {8, 8};  // wrong length
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.channel_schedule = {4, 6, 8, 8};  // increasing
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.n_multiscale_outputs = 5;  // more outputs than blocks
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.noise_h = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("noise shape selection reproduces the reference sizes") {
    int h0 = 0, w0 = 0, B = 0;
    select_noise_shape(192, 320, h0, w0, B);
    CHECK(h0 == 3);
    CHECK(w0 == 5);
    CHECK(B == 6);
    select_noise_shape(512, 896, h0, w0, B);
    CHECK(h0 == 4);
    CHECK(w0 == 7);
    CHECK(B == 7);
    select_noise_shape(256, 256, h0, w0, B);
    CHECK(h0 == 4);
    CHECK(w0 == 4);
    CHECK(B == 6);
    CHECK_THROWS_AS(select_noise_shape(16, 16, h0, w0, B), std::invalid_argument);
}

TEST_CASE("latent batches are seeded, shaped, and standard normal") {
    GeneratorConfig cfg = tiny_config();
    auto z1 = sample_latent<float>(99, 4, cfg);
    auto z2 = sample_latent<float>(99, 4, cfg);
    CHECK(z1.values.shape == Shape{4, kLatentChannels, 2, 3});
    for (std::int64_t i = 0; i < z1.values.numel(); ++i) CHECK(z1.values.data[i] == z2.values.data[i]);
    auto z3 = sample_latent<float>(100, 4, cfg);
    bool differs = false;
    for (std::int64_t i = 0; i < z1.values.numel(); ++i)
        differs = differs || z1.values.data[i] != z3.values.data[i];
    CHECK(differs);

    auto big = sample_latent<double>(1, 64, cfg);
    const double mean = big.values.data.mean();
    const double var = (big.values.data - mean).square().mean();
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("generator output pyramid doubles resolution per block") {
    GeneratorConfig cfg = tiny_config();
    Rng rng(11);
    auto g = Generator<float>::build(cfg, rng);
    auto out = g.generate(sample_latent<float>(5, 2, cfg));

    CHECK(out.final_image.shape() == Shape{2, 3, 16, 24});  // 2,3 doubled 3 times
    REQUIRE(out.intermediate_images.size() == 2);
    CHECK(out.intermediate_images[0].shape() == Shape{2, 3, 8, 12});
    CHECK(out.intermediate_images[1].shape() == Shape{2, 3, 16, 24});
    // last intermediate is the final image itself
    for (std::int64_t i = 0; i < out.final_image.value().numel(); ++i)
        CHECK(out.intermediate_images.back().value().data[i] == out.final_image.value().data[i]);

    REQUIRE(out.dr_features.size() == 3);
    CHECK(out.dr_features[0].shape() == Shape{2, 8, 4, 6});
    CHECK(out.dr_features[1].shape() == Shape{2, 6, 8, 12});
    CHECK(out.dr_features[2].shape() == Shape{2, 4, 16, 24});
}

TEST_CASE("images and diversity features stay in tanh range") {
    GeneratorConfig cfg = tiny_config();
    Rng rng(12);
    auto g = Generator<float>::build(cfg, rng);
    auto out = g.generate(sample_latent<float>(3, 2, cfg));
    for (const auto& img : out.intermediate_images)
        for (std::int64_t i = 0; i < img.value().numel(); ++i) {
            CHECK(img.value().data[i] <= 1.0f);
            CHECK(img.value().data[i] >= -1.0f);
        }
    for (const auto& f : out.dr_features)
        for (std::int64_t i = 0; i < f.value().numel(); ++i) {
            CHECK(f.value().data[i] <= 1.0f);
            CHECK(f.value().data[i] >= -1.0f);
        }
}

TEST_CASE("generation is deterministic given seed and weights") {
    GeneratorConfig cfg = tiny_config();
    Rng r1(13), r2(13);
    auto g1 = Generator<float>::build(cfg, r1);
    auto g2 = Generator<float>::build(cfg, r2);
    auto o1 = g1.generate(sample_latent<float>(21, 2, cfg));
    auto o2 = g2.generate(sample_latent<float>(21, 2, cfg));
    for (std::int64_t i = 0; i < o1.final_image.value().numel(); ++i)
        CHECK(o1.final_image.value().data[i] == o2.final_image.value().data[i]);
}

TEST_CASE("different latents give different images") {
    GeneratorConfig cfg = tiny_config();
    Rng rng(14);
    auto g = Generator<float>::build(cfg, rng);
    auto o1 = g.generate(sample_latent<float>(1, 2, cfg));
    auto o2 = g.generate(sample_latent<float>(2, 2, cfg));
    double diff = 0;
    for (std::int64_t i = 0; i < o1.final_image.value().numel(); ++i)
        diff += std::abs(double(o1.final_image.value().data[i]) - double(o2.final_image.value().data[i]));
    CHECK(diff > 1e-3);
}

TEST_CASE("generate rejects mismatched latent shapes") {
    GeneratorConfig cfg = tiny_config();
    Rng rng(15);
    auto g = Generator<float>::build(cfg, rng);
    GeneratorConfig other = cfg;
    other.noise_h = 3;
    CHECK_THROWS_AS(g.generate(sample_latent<float>(1, 2, other)), std::invalid_argument);
}

TEST_CASE("parameter names are unique and cover all blocks") {
    GeneratorConfig cfg = tiny_config();
    Rng rng(16);
    auto g = Generator<float>::build(cfg, rng);
    auto ps = g.params();
    std::set<std::string> names;
    for (const auto& p : ps) names.insert(p.name);
    CHECK(names.size() == ps.size());
    // input conv + 3 blocks x 3 convs + 2 heads, each with .w and .b
    CHECK(ps.size() == size_t(2 * (1 + 3 * 3 + 2)));
    CHECK(names.count("g.in.w") == 1);
    CHECK(names.count("g.block0.conv1.w") == 1);
    CHECK(names.count("g.block2.skip.b") == 1);
}

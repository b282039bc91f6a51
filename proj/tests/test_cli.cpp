// SPDX-License-Identifier: Apache-2.0
// Spawns the installed binary and checks its documented surface: artifacts,
// determinism, exit codes, report schema.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sivgan/image_io.hpp"
#include "sivgan/rng.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace sivgan;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

fs::path ws_root() {
    static const fs::path p = [] {
        fs::path root = fs::temp_directory_path() / "sivgan_cli_ws";
        fs::remove_all(root);
        fs::create_directories(root);
        return root;
    }();
    return p;
}

RunResult run_cli(const std::string& args) {
    static int call = 0;
    const std::string capture = (ws_root() / ("cmd_" + std::to_string(call++) + ".txt")).string();
    const std::string cmd = std::string(SIVGAN_CLI_PATH) + " " + args + " >" + capture + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    if (WIFEXITED(status)) r.code = WEXITSTATUS(status);
    std::ifstream f(capture, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    r.out = ss.str();
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

struct Fixture {
    fs::path src_png, cfg, train_out;
};

/// One tiny training run shared by every case (4 iterations at 16x24).
const Fixture& fx() {
    static const Fixture f = [] {
        Fixture x;
        x.src_png = ws_root() / "texture.png";
        Rng rng(60);
        TensorF img = testutil::random_tensor_f(rng, {1, 3, 32, 48}, 0.5f);
        img.data = img.data.min(1.0f).max(-1.0f);
        save_png(x.src_png.string(), tensor_to_image(img));

        x.cfg = ws_root() / "tiny.cfg";
        std::ofstream c(x.cfg, std::ios::binary);
        c << "# tiny smoke setup\n"
             "gen.noise_h = 2\n"
             "gen.noise_w = 3\n"
             "gen.num_blocks = 3\n"
             "gen.n_multiscale = 2\n"
             "gen.width_mult = 0.03125\n"
             "disc.n_low_level = 2\n"
             "disc.n_branch = 2\n"
             "disc.width_mult = 0.03125\n"
             "train.iterations = 4\n"
             "train.batch_size = 2\n"
             "train.checkpoint_every = 2\n"
             "train.seed = 11\n"
             "eval.n_generated = 3\n"
             "eval.aug_pool_size = 3\n";
        c.close();

        x.train_out = ws_root() / "run1";
        const RunResult r = run_cli("train --config " + x.cfg.string() + " --source " +
                                    x.src_png.string() + " --out " + x.train_out.string());
        if (r.code != 0) throw std::runtime_error("fixture training failed:\n" + r.out);
        return x;
    }();
    return f;
}

}  // namespace

TEST_CASE("help lists subcommands and every config key") {
    const RunResult r = run_cli("--help");
    CHECK(r.code == 0);
    for (const char* word : {"train", "generate", "evaluate", "inspect", "gen.noise_h", "aug.p_da",
                             "ablation.no_dr", "eval.aug_pool_size"})
        CHECK(r.out.find(word) != std::string::npos);
}

TEST_CASE("training writes config echo, loss log, checkpoints and grids") {
    const Fixture& f = fx();
    CHECK(fs::exists(f.train_out / "config.txt"));
    CHECK(read_file(f.train_out / "config.txt").find("train.target_h=16") != std::string::npos);
    const std::string csv = read_file(f.train_out / "loss.csv");
    CHECK(csv.rfind("iter,d_total,g_total,d_low,d_content,d_layout,dr\n", 0) == 0);
    CHECK(count_lines(csv) == 5);  // header + 4 iterations
    CHECK(fs::exists(f.train_out / "checkpoint_000002.ckpt"));
    CHECK(fs::exists(f.train_out / "checkpoint_000004.ckpt"));
    CHECK(fs::exists(f.train_out / "grid_000002.png"));
    CHECK(fs::exists(f.train_out / "grid_000004.png"));
    CHECK_FALSE(fs::exists(f.train_out / "checkpoint_final.ckpt"));
}

TEST_CASE("rerunning training reproduces logs and checkpoints byte for byte") {
    const Fixture& f = fx();
    const fs::path out2 = ws_root() / "run2";
    const RunResult r = run_cli("train --config " + f.cfg.string() + " --source " +
                                f.src_png.string() + " --out " + out2.string());
    REQUIRE(r.code == 0);
    CHECK(read_file(out2 / "loss.csv") == read_file(f.train_out / "loss.csv"));
    CHECK(read_file(out2 / "checkpoint_000004.ckpt") ==
          read_file(f.train_out / "checkpoint_000004.ckpt"));
}

TEST_CASE("resuming from a checkpoint lands on the identical final state") {
    const Fixture& f = fx();
    const fs::path out3 = ws_root() / "run3";
    const RunResult r = run_cli("train --config " + f.cfg.string() + " --source " +
                                f.src_png.string() + " --out " + out3.string() + " --resume " +
                                (f.train_out / "checkpoint_000002.ckpt").string());
    REQUIRE(r.code == 0);
    CHECK(read_file(out3 / "checkpoint_000004.ckpt") ==
          read_file(f.train_out / "checkpoint_000004.ckpt"));
    CHECK(count_lines(read_file(out3 / "loss.csv")) == 2);  // iterations 2 and 3, no header
}

TEST_CASE("generate emits the requested number of deterministic samples") {
    const Fixture& f = fx();
    const std::string ckpt = (f.train_out / "checkpoint_000004.ckpt").string();
    const fs::path g1 = ws_root() / "gen1", g2 = ws_root() / "gen2", g0 = ws_root() / "gen0";
    REQUIRE(run_cli("generate --checkpoint " + ckpt + " --out " + g1.string() + " --n 3").code == 0);
    CHECK(fs::exists(g1 / "sample_00000.png"));
    CHECK(fs::exists(g1 / "sample_00002.png"));
    CHECK_FALSE(fs::exists(g1 / "sample_00003.png"));
    REQUIRE(run_cli("generate --checkpoint " + ckpt + " --out " + g2.string() + " --n 3").code == 0);
    CHECK(read_file(g1 / "sample_00000.png") == read_file(g2 / "sample_00000.png"));
    CHECK(read_file(g1 / "sample_00002.png") == read_file(g2 / "sample_00002.png"));

    REQUIRE(run_cli("generate --checkpoint " + ckpt + " --out " + g0.string() + " --n 0").code == 0);
    CHECK_FALSE(fs::exists(g0 / "sample_00000.png"));

    const fs::path g3 = ws_root() / "gen3";
    REQUIRE(run_cli("generate --checkpoint " + ckpt + " --out " + g3.string() + " --n 3 --seed 99")
                .code == 0);
    CHECK(read_file(g1 / "sample_00000.png") != read_file(g3 / "sample_00000.png"));
}

TEST_CASE("evaluate writes the report in both formats with the fixed schema") {
    const Fixture& f = fx();
    const fs::path ev = ws_root() / "eval1";
    const RunResult r =
        run_cli("evaluate --checkpoint " + (f.train_out / "checkpoint_000004.ckpt").string() +
                " --source " + f.src_png.string() + " --out " + ev.string() + " --plugins toy");
    REQUIRE(r.code == 0);
    const std::string json = read_file(ev / "report.json");
    for (const char* key : {"sifid.quarter", "sifid.eighth", "sifid.sixteenth", "sifid.global",
                            "diversity_lpips", "dist_to_train", "pixel_diversity", "n_generated"})
        CHECK(json.find(std::string("\"") + key + "\"") != std::string::npos);
    CHECK(json.find("\"n_generated\": 3") != std::string::npos);
    const std::string csv = read_file(ev / "report.csv");
    CHECK(csv.rfind("sifid.quarter,sifid.eighth,sifid.sixteenth,sifid.global,"
                    "diversity_lpips,dist_to_train,pixel_diversity,n_generated\n",
                    0) == 0);
    CHECK(count_lines(csv) == 2);
}

TEST_CASE("evaluate accepts pre-generated images instead of a checkpoint") {
    const Fixture& f = fx();
    const fs::path imgs = ws_root() / "pregen";
    fs::create_directories(imgs);
    Rng rng(61);
    for (int i = 0; i < 3; ++i) {
        TensorF t = testutil::random_tensor_f(rng, {1, 3, 32, 48}, 0.5f);
        t.data = t.data.min(1.0f).max(-1.0f);
        save_png((imgs / ("img" + std::to_string(i) + ".png")).string(), tensor_to_image(t));
    }
    const fs::path ev = ws_root() / "eval2";
    const RunResult r = run_cli("evaluate --images " + imgs.string() + " --source " +
                                f.src_png.string() + " --out " + ev.string());
    REQUIRE(r.code == 0);
    CHECK(read_file(ev / "report.json").find("\"n_generated\": 3") != std::string::npos);
}

TEST_CASE("inspect prints the manifest") {
    const Fixture& f = fx();
    const RunResult r =
        run_cli("inspect --checkpoint " + (f.train_out / "checkpoint_000004.ckpt").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("iteration: 4") != std::string::npos);
    CHECK(r.out.find("root_seed: 11") != std::string::npos);
    CHECK(r.out.find("tensors:") != std::string::npos);
    CHECK(r.out.find("g.block0.conv1.w") != std::string::npos);
}

TEST_CASE("failures exit with the documented codes") {
    const Fixture& f = fx();

    SUBCASE("unknown config key names the key and exits 2") {
        const fs::path bad = ws_root() / "bad.cfg";
        std::ofstream(bad) << "bogus.key = 1\n";
        const RunResult r = run_cli("train --config " + bad.string() + " --source " +
                                    f.src_png.string() + " --out " + (ws_root() / "x1").string());
        CHECK(r.code == 2);
        CHECK(r.out.find("bogus.key") != std::string::npos);
    }
    SUBCASE("missing source exits 2") {
        const RunResult r = run_cli("train --source " + (ws_root() / "nope.png").string() +
                                    " --out " + (ws_root() / "x2").string());
        CHECK(r.code == 2);
    }
    SUBCASE("missing checkpoint exits 3") {
        const RunResult r = run_cli("generate --checkpoint " + (ws_root() / "nope.ckpt").string() +
                                    " --out " + (ws_root() / "x3").string());
        CHECK(r.code == 3);
    }
    SUBCASE("missing plugin weights exit 4 and mention the toy fallback") {
        const fs::path empty = ws_root() / "no_plugins";
        fs::create_directories(empty);
        const RunResult r =
            run_cli("evaluate --checkpoint " + (f.train_out / "checkpoint_000004.ckpt").string() +
                    " --source " + f.src_png.string() + " --out " + (ws_root() / "x4").string() +
                    " --plugins files:" + empty.string());
        CHECK(r.code == 4);
        CHECK(r.out.find("--plugins toy") != std::string::npos);
    }
    SUBCASE("unknown plugin spec exits 4") {
        const RunResult r =
            run_cli("evaluate --checkpoint " + (f.train_out / "checkpoint_000004.ckpt").string() +
                    " --source " + f.src_png.string() + " --out " + (ws_root() / "x5").string() +
                    " --plugins wat");
        CHECK(r.code == 4);
    }
}

// SPDX-License-Identifier: Apache-2.0
#include "sivgan/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sivgan/errors.hpp"

namespace sivgan {

const std::vector<ConfigKeyInfo>& config_registry() {
    static const std::vector<ConfigKeyInfo> keys = {
        {"source.kind", "single_image", "single_image or single_video"},
        {"gen.noise_h", "0", "noise grid height h0; 0 picks it from the target size"},
        {"gen.noise_w", "0", "noise grid width w0; 0 picks it from the target size"},
        {"gen.num_blocks", "0", "generator blocks B; 0 picks it from the target size"},
        {"gen.n_multiscale", "3", "image outputs fed to the low-level critic"},
        {"gen.width_mult", "1.0", "generator channel width multiplier"},
        {"disc.n_low_level", "3", "trunk blocks before branching"},
        {"disc.n_branch", "4", "blocks per content/layout branch"},
        {"disc.layout_channels", "1", "layout branch width"},
        {"disc.width_mult", "1.0", "discriminator channel width multiplier"},
        {"train.iterations", "0", "training iterations; 0 = 100000 image / 300000 video"},
        {"train.lr_g", "0.0002", "generator Adam learning rate"},
        {"train.lr_d", "0.0002", "discriminator Adam learning rate"},
        {"train.adam_beta1", "0.5", "Adam beta1"},
        {"train.adam_beta2", "0.999", "Adam beta2"},
        {"train.batch_size", "5", "samples per step"},
        {"train.seed", "0", "root RNG seed"},
        {"train.checkpoint_every", "5000", "iterations between checkpoints and sample grids"},
        {"train.target_h", "0", "training resolution; 0 = native source height"},
        {"train.target_w", "0", "training resolution; 0 = native source width"},
        {"loss.lambda_dr", "0.15", "diversity regularization weight"},
        {"aug.p_fa", "0.4", "feature augmentation probability per forward pass"},
        {"aug.p_da", "0.7", "image augmentation probability per sample per transform"},
        {"aug.fa_rect_area_lo", "0.1", "layout mix rect area fraction, lower bound"},
        {"aug.fa_rect_area_hi", "0.5", "layout mix rect area fraction, upper bound"},
        {"aug.fa_rect_aspect_lo", "0.5", "layout mix rect aspect ratio, lower bound"},
        {"aug.fa_rect_aspect_hi", "2.0", "layout mix rect aspect ratio, upper bound"},
        {"aug.fa_mix_lo", "0.1", "content channel-mix fraction, lower bound"},
        {"aug.fa_mix_hi", "0.5", "content channel-mix fraction, upper bound"},
        {"aug.fa_drop_lo", "0.05", "content channel-dropout fraction, lower bound"},
        {"aug.fa_drop_hi", "0.25", "content channel-dropout fraction, upper bound"},
        {"aug.da_max_translate", "0.125", "translation limit, fraction of image side"},
        {"aug.da_crop_lo", "0.8", "crop scale, lower bound"},
        {"aug.da_crop_hi", "1.0", "crop scale, upper bound"},
        {"aug.da_max_rotate", "15.0", "rotation limit in degrees"},
        {"ablation.no_content_branch", "false", "drop content-branch heads from the objective"},
        {"ablation.no_layout_branch", "false", "drop layout-branch heads from the objective"},
        {"ablation.no_fa", "false", "disable feature augmentation"},
        {"ablation.no_dr", "false", "disable diversity regularization"},
        {"ablation.no_low_level_loss", "false", "drop low-level heads from the objective"},
        {"ablation.dr_image_space", "false", "measure diversity on final images instead of features"},
        {"eval.n_generated", "100", "images generated for evaluation"},
        {"eval.aug_pool_size", "50", "augmented training samples in the reference pool"},
    };
    return keys;
}

RunConfig::RunConfig() {
    for (const auto& k : config_registry()) values_[k.key] = k.def;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

int RunConfig::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return int(x);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' needs an integer, got '" + v + "'");
    }
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' needs a number, got '" + v + "'");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "' needs true/false, got '" + v + "'");
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str(), path);
}

std::string RunConfig::echo() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

}  // namespace sivgan

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sivgan/augmentation.hpp"
#include "sivgan/checkpoint.hpp"
#include "sivgan/data.hpp"
#include "sivgan/errors.hpp"
#include "sivgan/image_io.hpp"
#include "sivgan/nn.hpp"

namespace sivgan {

/// Deterministic image-to-features map at a named depth. Spatial depths
/// return one row per location; the global depth returns a single row.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string name() const = 0;
    virtual std::string depth() const = 0;  // quarter, eighth, sixteenth, global
    virtual Eigen::MatrixXd extract(const TensorF& image) const = 0;
};

class PerceptualDistance {
public:
    virtual ~PerceptualDistance() = default;
    virtual std::string name() const = 0;
    virtual double dist(const TensorF& a, const TensorF& b) const = 0;
};

inline const std::vector<std::string>& extractor_depths() {
    static const std::vector<std::string> d = {"quarter", "eighth", "sixteenth", "global"};
    return d;
}

struct MetricReport {
    std::map<std::string, double> sifid;  // keyed by depth
    double diversity_lpips = 0;
    double dist_to_train = 0;
    double pixel_diversity = 0;
    int n_generated = 0;
};

/// Squared Wasserstein-2 distance between Gaussians. The matrix square root
/// uses the symmetrized product sqrt(C1) C2 sqrt(C1) so a self-adjoint
/// eigensolver applies; tiny negative eigenvalues from roundoff clamp to 0.
inline double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                               const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2) {
    const auto n = mu1.size();
    check_arg(mu2.size() == n && cov1.rows() == n && cov1.cols() == n && cov2.rows() == n &&
                  cov2.cols() == n,
              "frechet_distance: dimension mismatch");
    const double scale1 = std::max(1.0, cov1.cwiseAbs().maxCoeff());
    const double scale2 = std::max(1.0, cov2.cwiseAbs().maxCoeff());
    check_arg((cov1 - cov1.transpose()).cwiseAbs().maxCoeff() <= 1e-6 * scale1,
              "frechet_distance: cov1 is not symmetric");
    check_arg((cov2 - cov2.transpose()).cwiseAbs().maxCoeff() <= 1e-6 * scale2,
              "frechet_distance: cov2 is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(cov1);
    Eigen::VectorXd ev1 = es1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd root1 = es1.eigenvectors() * ev1.asDiagonal() * es1.eigenvectors().transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(root1 * cov2 * root1);
    const double tr_sqrt = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double d = (mu1 - mu2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * tr_sqrt;
    return std::max(0.0, d);
}

/// Mean and covariance over rows (unbiased n-1 denominator; zero covariance
/// for a single row, as a global feature vector has no spatial spread).
inline void feature_stats(const Eigen::MatrixXd& rows, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    const auto n = rows.rows();
    check_arg(n >= 1, "feature_stats: empty feature matrix");
    mu = rows.colwise().mean();
    if (n == 1) {
        cov = Eigen::MatrixXd::Zero(rows.cols(), rows.cols());
        return;
    }
    const Eigen::MatrixXd centered = rows.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / double(n - 1);
}

/// Mean Frechet distance between the real image's feature statistics and
/// each generated image's, one Gaussian per image over spatial locations.
inline double sifid(const TensorF& real_image, const std::vector<TensorF>& generated,
                    const FeatureExtractor& extractor) {
    check_arg(!generated.empty(), "sifid: need at least one generated image");
    const Eigen::MatrixXd real_rows = extractor.extract(real_image);
    if (extractor.depth() != "global")
        check_arg(real_rows.rows() >= 2, "sifid: spatial depth '" + extractor.depth() +
                                             "' yields <2 locations; covariance undefined");
    Eigen::VectorXd mu_r;
    Eigen::MatrixXd cov_r;
    feature_stats(real_rows, mu_r, cov_r);
    double acc = 0;
    for (const auto& g : generated) {
        Eigen::VectorXd mu_g;
        Eigen::MatrixXd cov_g;
        feature_stats(extractor.extract(g), mu_g, cov_g);
        acc += frechet_distance(mu_r, cov_r, mu_g, cov_g);
    }
    return acc / double(generated.size());
}

inline double pairwise_diversity(const std::vector<TensorF>& images, const PerceptualDistance& metric) {
    check_arg(images.size() >= 2, "pairwise_diversity: need at least 2 images");
    double acc = 0;
    std::int64_t count = 0;
    for (size_t i = 0; i < images.size(); ++i)
        for (size_t j = i + 1; j < images.size(); ++j) {
            acc += metric.dist(images[i], images[j]);
            ++count;
        }
    return acc / double(count);
}

inline double dist_to_train(const std::vector<TensorF>& generated, const std::vector<TensorF>& pool,
                            const PerceptualDistance& metric) {
    check_arg(!generated.empty() && !pool.empty(), "dist_to_train: empty inputs");
    double acc = 0;
    for (const auto& g : generated) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : pool) best = std::min(best, metric.dist(g, p));
        acc += best;
    }
    return acc / double(generated.size());
}

/// Mean per-pixel standard deviation across generations, normalized per
/// channel by the training image's own pixel spread (population std).
inline double pixel_diversity(const std::vector<TensorF>& generated, const TensorF& train_image) {
    check_arg(generated.size() >= 2, "pixel_diversity: need at least 2 generated images");
    const Shape s = train_image.shape;
    for (const auto& g : generated)
        check_arg(g.shape == s, "pixel_diversity: shape mismatch " + g.shape.str() + " vs " + s.str());
    const auto hw = s.spatial();
    const double n = double(generated.size());
    double result = 0;
    for (int c = 0; c < s.c; ++c) {
        const auto train_ch = train_image.data.segment(train_image.index(0, c, 0, 0), hw);
        const double tmean = train_ch.mean();
        const double tstd = std::sqrt((train_ch - float(tmean)).square().template cast<double>().mean());
        check_arg(tstd > 0, "pixel_diversity: training image channel " + std::to_string(c) +
                                " has zero variance; metric undefined");
        double mean_std = 0;
        for (std::int64_t p = 0; p < hw; ++p) {
            double m = 0, m2 = 0;
            for (const auto& g : generated) {
                const double v = double(g.data[g.index(0, c, 0, 0) + p]);
                m += v;
                m2 += v * v;
            }
            m /= n;
            mean_std += std::sqrt(std::max(0.0, m2 / n - m * m));
        }
        result += (mean_std / double(hw)) / tstd;
    }
    return result / double(s.c);
}

/// Fixed random-projection convolution stack: conv3x3 + leaky relu + 2x2
/// average pooling per stage. Weights are frozen at construction, either
/// seeded or loaded from an archive, so features are deterministic.
class ConvStackExtractor : public FeatureExtractor {
public:
    ConvStackExtractor(std::string name, std::string depth, int channels, std::uint64_t seed)
        : name_(std::move(name)), depth_(std::move(depth)), stages_(depth_stages(depth_)) {
        Rng rng(seed);
        int in_c = 3;
        for (int i = 0; i < stages_; ++i) {
            convs_.push_back(nn::Conv2d<float>::create(rng, in_c, channels, 3, false));
            in_c = channels;
        }
    }

    ConvStackExtractor(std::string name, std::string depth, const Checkpoint& weights)
        : name_(std::move(name)), depth_(std::move(depth)), stages_(depth_stages(depth_)) {
        int in_c = 3;
        for (int i = 0; i < stages_; ++i) {
            const std::string base = "conv" + std::to_string(i);
            const CheckpointBlob* w = weights.find(base + ".w");
            const CheckpointBlob* b = weights.find(base + ".b");
            if (!w || !b || w->dims.size() != 4)
                throw PluginError("extractor weights are missing tensor '" + base + "'");
            const int oc = int(w->dims[0]), ic = int(w->dims[1]), k = int(w->dims[2]);
            if (ic != in_c || k != int(w->dims[3]))
                throw PluginError("extractor tensor '" + base + "' has unexpected shape");
            Rng dummy(0);
            auto conv = nn::Conv2d<float>::create(dummy, ic, oc, k, false);
            for (size_t j = 0; j < w->data.size(); ++j) conv.weight().value().data[j] = w->data[j];
            for (size_t j = 0; j < b->data.size(); ++j) conv.bias().value().data[j] = b->data[j];
            convs_.push_back(std::move(conv));
            in_c = oc;
        }
    }

    std::string name() const override { return name_; }
    std::string depth() const override { return depth_; }

    Eigen::MatrixXd extract(const TensorF& image) const override {
        check_arg(image.shape.n == 1 && image.shape.c == 3, "extract: expected one RGB sample");
        NoGradScope ng;
        Var<float> h = Var<float>::constant(image);
        for (const auto& conv : convs_) h = ops::avg_pool2(ops::leaky_relu(conv.forward(h)));
        if (depth_ == "global") h = ops::global_avg_pool(h);
        const Tensor<float>& t = h.value();
        Eigen::MatrixXd rows(t.shape.spatial(), t.shape.c);
        for (int c = 0; c < t.shape.c; ++c)
            for (std::int64_t p = 0; p < t.shape.spatial(); ++p)
                rows(p, c) = double(t.data[t.index(0, c, 0, 0) + p]);
        return rows;
    }

    /// Stage weights in archive form (the files plugin's storage format).
    Checkpoint export_weights() const {
        Checkpoint ck;
        for (size_t i = 0; i < convs_.size(); ++i) {
            const auto& w = convs_[i].weight().value();
            const auto& b = convs_[i].bias().value();
            std::vector<float> wd(w.data.data(), w.data.data() + w.numel());
            std::vector<float> bd(b.data.data(), b.data.data() + b.numel());
            ck.add("conv" + std::to_string(i) + ".w",
                   {w.shape.n, w.shape.c, w.shape.h, w.shape.w}, std::move(wd));
            ck.add("conv" + std::to_string(i) + ".b", {b.numel()}, std::move(bd));
        }
        ck.sort_blobs();
        return ck;
    }

private:
    static int depth_stages(const std::string& d) {
        if (d == "quarter") return 2;
        if (d == "eighth") return 3;
        if (d == "sixteenth") return 4;
        if (d == "global") return 4;
        throw PluginError("unknown extractor depth '" + d + "'");
    }

    std::string name_, depth_;
    int stages_;
    std::vector<nn::Conv2d<float>> convs_;
};

/// Mean absolute difference of mid-depth random-projection features.
class ConvStackDistance : public PerceptualDistance {
public:
    ConvStackDistance(std::string name, ConvStackExtractor extractor)
        : name_(std::move(name)), extractor_(std::move(extractor)) {}

    std::string name() const override { return name_; }

    double dist(const TensorF& a, const TensorF& b) const override {
        check_arg(a.shape == b.shape, "perceptual distance: shape mismatch");
        const Eigen::MatrixXd fa = extractor_.extract(a), fb = extractor_.extract(b);
        return (fa - fb).cwiseAbs().mean();
    }

private:
    std::string name_;
    ConvStackExtractor extractor_;
};

struct MetricPlugins {
    std::vector<std::unique_ptr<FeatureExtractor>> extractors;  // one per depth
    std::unique_ptr<PerceptualDistance> distance;
};

inline MetricPlugins make_toy_plugins(std::uint64_t seed = 2024) {
    MetricPlugins p;
    const auto& depths = extractor_depths();
    for (size_t i = 0; i < depths.size(); ++i)
        p.extractors.push_back(
            std::make_unique<ConvStackExtractor>("toy", depths[i], 8, mix_seed(seed, 100 + i)));
    p.distance = std::make_unique<ConvStackDistance>(
        "toy", ConvStackExtractor("toy", "quarter", 8, mix_seed(seed, 200)));
    return p;
}

/// Loads extractor weight archives extractor_<depth>.ckpt and
/// distance.ckpt from a directory.
inline MetricPlugins load_file_plugins(const std::string& dir) {
    namespace fs = std::filesystem;
    MetricPlugins p;
    for (const auto& d : extractor_depths()) {
        const std::string path = dir + "/extractor_" + d + ".ckpt";
        if (!fs::exists(path))
            throw PluginError("missing plugin weights '" + path +
                              "'; provide weight archives or run with --plugins toy");
        try {
            p.extractors.push_back(std::make_unique<ConvStackExtractor>("files", d, Checkpoint::load(path)));
        } catch (const CheckpointError& e) {
            throw PluginError(std::string("cannot load plugin weights: ") + e.what());
        }
    }
    const std::string dist_path = dir + "/distance.ckpt";
    if (!fs::exists(dist_path))
        throw PluginError("missing plugin weights '" + dist_path +
                          "'; provide weight archives or run with --plugins toy");
    try {
        p.distance = std::make_unique<ConvStackDistance>(
            "files", ConvStackExtractor("files", "quarter", Checkpoint::load(dist_path)));
    } catch (const CheckpointError& e) {
        throw PluginError(std::string("cannot load plugin weights: ") + e.what());
    }
    return p;
}

struct EvalConfig {
    int n_generated = 100;
    int aug_pool_size = 50;
    std::uint64_t seed = 0;
    ImageAugConfig da;  // pool augmentation mirrors training augmentation
};

/// Full metric pass: generated images are compared at the training source's
/// native resolution; the reference image is the single training image or
/// the middle video frame; the nearest-neighbor pool holds augmented frames.
inline MetricReport run_evaluation(const std::vector<TensorF>& generated_raw, const TrainingSource& src,
                                   const MetricPlugins& plugins, const EvalConfig& cfg) {
    check_arg(generated_raw.size() >= 2, "evaluation: need at least 2 generated images");
    check_arg(!src.images.empty(), "evaluation: empty training source");
    const TensorF& reference = src.images[src.images.size() / 2];

    std::vector<TensorF> generated;
    for (const auto& g : generated_raw)
        generated.push_back(resize_bilinear(g, src.native_h, src.native_w));

    MetricReport report;
    report.n_generated = int(generated.size());
    for (const auto& ex : plugins.extractors) report.sifid[ex->depth()] = sifid(reference, generated, *ex);
    report.diversity_lpips = pairwise_diversity(generated, *plugins.distance);

    std::vector<TensorF> pool;
    Rng rng(stream_seed(cfg.seed, Stream::eval));
    NoGradScope ng;
    for (int i = 0; i < cfg.aug_pool_size; ++i) {
        const int fi = src.images.size() == 1 ? 0 : rng.uniform_int(0, int(src.images.size()) - 1);
        const ImageAugParams params = sample_image_aug_params(rng, 1, cfg.da);
        pool.push_back(differentiable_augment(Var<float>::constant(src.images[fi]), params).value());
    }
    report.dist_to_train = dist_to_train(generated, pool, *plugins.distance);
    report.pixel_diversity = pixel_diversity(generated, reference);
    return report;
}

}  // namespace sivgan

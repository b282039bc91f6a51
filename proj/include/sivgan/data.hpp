// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "sivgan/errors.hpp"
#include "sivgan/image_io.hpp"
#include "sivgan/ops.hpp"
#include "sivgan/rng.hpp"

namespace sivgan {

enum class SourceKind { single_image, single_video };

inline SourceKind parse_source_kind(const std::string& s) {
    if (s == "single_image") return SourceKind::single_image;
    if (s == "single_video") return SourceKind::single_video;
    throw ConfigError("source.kind must be single_image or single_video, got '" + s + "'");
}

struct TrainingSource {
    SourceKind kind = SourceKind::single_image;
    std::vector<TensorF> images;  // each (1, 3, H, W) in [-1, 1]
    int native_h = 0, native_w = 0;
};

/// Loads one image file, or a directory of frames ordered by filename.
inline TrainingSource load_source(const std::string& path, SourceKind kind) {
    namespace fs = std::filesystem;
    TrainingSource src;
    src.kind = kind;
    if (!fs::exists(path)) throw ConfigError("source path does not exist: " + path);
    std::vector<std::string> files;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path)) {
            if (!e.is_regular_file()) continue;
            const std::string ext = e.path().extension().string();
            if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".PNG" || ext == ".JPG")
                files.push_back(e.path().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw ConfigError("no frames (.png/.jpg) found in directory: " + path);
    } else {
        files.push_back(path);
    }
    if (kind == SourceKind::single_image && files.size() > 1)
        throw ConfigError("single_image source must be one file, found " + std::to_string(files.size()) +
                          " frames in " + path);
    if (kind == SourceKind::single_video && files.size() < 2)
        throw ConfigError("single_video source needs a directory of at least 2 frames");
    for (const auto& f : files) {
        TensorF t = image_to_tensor(load_image(f));
        if (src.images.empty()) {
            src.native_h = t.shape.h;
            src.native_w = t.shape.w;
        } else if (t.shape.h != src.native_h || t.shape.w != src.native_w) {
            throw ConfigError("frame size mismatch: " + f + " is " + std::to_string(t.shape.w) + "x" +
                              std::to_string(t.shape.h) + ", expected " + std::to_string(src.native_w) +
                              "x" + std::to_string(src.native_h));
        }
        src.images.push_back(std::move(t));
    }
    return src;
}

struct BatchSpec {
    int batch_size = 5;
    int target_h = 0, target_w = 0;

    void validate() const {
        if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (feature mixing needs pairs)");
        if (target_h < 1 || target_w < 1) throw ConfigError("batch target size must be positive");
    }
};

/// Single image: batch_size copies. Video: frames sampled uniformly with
/// replacement. Either way resized to the target resolution.
inline TensorF make_batch(const TrainingSource& src, const BatchSpec& spec, Rng& rng,
                          std::vector<int>* indices = nullptr) {
    spec.validate();
    check_arg(!src.images.empty(), "make_batch: empty source");
    TensorF batch(Shape{spec.batch_size, 3, spec.target_h, spec.target_w});
    const auto stride = std::int64_t(3) * spec.target_h * spec.target_w;
    std::vector<TensorF> resized_cache(src.images.size());
    for (int b = 0; b < spec.batch_size; ++b) {
        const int i = src.kind == SourceKind::single_image
                          ? 0
                          : rng.uniform_int(0, int(src.images.size()) - 1);
        if (indices) indices->push_back(i);
        if (resized_cache[i].numel() == 0)
            resized_cache[i] = resize_bilinear(src.images[i], spec.target_h, spec.target_w);
        batch.data.segment(std::int64_t(b) * stride, stride) = resized_cache[i].data;
    }
    return batch;
}

/// Coarse-to-fine x2 pyramid by repeated 2x2 area averaging.
template <typename S>
std::vector<Var<S>> build_image_pyramid(const Var<S>& batch, int n_levels) {
    check_arg(n_levels >= 1, "build_image_pyramid: need at least one level");
    const Shape s = batch.shape();
    const int div = 1 << (n_levels - 1);
    check_arg(s.h % div == 0 && s.w % div == 0,
              "build_image_pyramid: " + s.str() + " not divisible by 2^" + std::to_string(n_levels - 1));
    std::vector<Var<S>> levels(n_levels);
    levels[n_levels - 1] = batch;
    for (int k = n_levels - 2; k >= 0; --k) levels[k] = ops::avg_pool2(levels[k + 1]);
    return levels;
}

/// Shells out to ffmpeg to split a video into frames; reports failure
/// instead of throwing so callers can fall back to a frames directory.
inline bool extract_video_frames(const std::string& video_path, const std::string& out_dir,
                                 std::string* error) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        if (error) *error = "cannot create " + out_dir + ": " + ec.message();
        return false;
    }
    const std::string cmd =
        "ffmpeg -loglevel error -i '" + video_path + "' '" + out_dir + "/%05d.png' 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) {
        if (error)
            *error = "frame extraction failed (is ffmpeg installed?); pass a directory of frames instead";
        return false;
    }
    return true;
}

}  // namespace sivgan

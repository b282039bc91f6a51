// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sivgan/tensor.hpp"

namespace sivgan {

/// Interleaved 8-bit RGB buffer.
struct ImageU8 {
    int h = 0, w = 0;
    std::vector<unsigned char> rgb;  // h * w * 3
};

/// Decodes a PNG or JPEG file (dispatched on magic bytes) to RGB.
ImageU8 load_image(const std::string& path);

void save_png(const std::string& path, const ImageU8& img);

/// 8-bit RGB to a (1, 3, h, w) tensor in [-1, 1].
TensorF image_to_tensor(const ImageU8& img);

/// Tensor sample to 8-bit RGB via v_png = round((v + 1) * 127.5), clamped.
ImageU8 tensor_to_image(const TensorF& t, int sample = 0);

/// Bilinear resize with half-pixel centers (align_corners = false).
template <typename S>
Tensor<S> resize_bilinear(const Tensor<S>& src, int out_h, int out_w);

/// Grid of samples (row-major), 2-pixel black separators.
ImageU8 montage(const TensorF& batch, int cols);

}  // namespace sivgan

// SPDX-License-Identifier: Apache-2.0
#include "sivgan/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace sivgan {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error("image_io: " + what + ": " + path);
}

ImageU8 load_png(std::FILE* f, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png alloc failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(path, "png alloc failed");
    }
    std::vector<png_bytep> rows;
    ImageU8 img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "png decode failed");
    }
    png_init_io(png, f);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    img.h = int(png_get_image_height(png, info));
    img.w = int(png_get_image_width(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "png channel conversion failed");
    }
    img.rgb.resize(size_t(img.h) * img.w * 3);
    rows.resize(img.h);
    for (int y = 0; y < img.h; ++y) rows[y] = img.rgb.data() + size_t(y) * img.w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

struct JpegErr {
    jpeg_error_mgr mgr;
    std::jmp_buf jmp;
};

void jpeg_err_exit(j_common_ptr cinfo) {
    std::longjmp(reinterpret_cast<JpegErr*>(cinfo->err)->jmp, 1);
}

ImageU8 load_jpeg(std::FILE* f, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_err_exit;
    if (setjmp(err.jmp)) {
        jpeg_destroy_decompress(&cinfo);
        fail(path, "jpeg decode failed");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    ImageU8 img;
    img.h = int(cinfo.output_height);
    img.w = int(cinfo.output_width);
    img.rgb.resize(size_t(img.h) * img.w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.rgb.data() + size_t(cinfo.output_scanline) * img.w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

}  // namespace

ImageU8 load_image(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail(path, "cannot open");
    unsigned char magic[4] = {};
    if (std::fread(magic, 1, 4, f.get()) != 4) fail(path, "file too short");
    std::rewind(f.get());
    if (magic[0] == 0x89 && magic[1] == 'P') return load_png(f.get(), path);
    if (magic[0] == 0xFF && magic[1] == 0xD8) return load_jpeg(f.get(), path);
    fail(path, "unsupported format (need PNG or JPEG)");
}

void save_png(const std::string& path, const ImageU8& img) {
    check_arg(img.h > 0 && img.w > 0 && img.rgb.size() == size_t(img.h) * img.w * 3,
              "save_png: malformed image buffer");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail(path, "cannot open for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png alloc failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(path, "png alloc failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "png encode failed");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] = const_cast<png_bytep>(img.rgb.data() + size_t(y) * img.w * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

TensorF image_to_tensor(const ImageU8& img) {
    TensorF t(Shape{1, 3, img.h, img.w});
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c)
                t.at(0, c, y, x) = float(img.rgb[(size_t(y) * img.w + x) * 3 + c]) / 127.5f - 1.0f;
    return t;
}

ImageU8 tensor_to_image(const TensorF& t, int sample) {
    const Shape s = t.shape;
    check_arg(s.c == 3 && sample >= 0 && sample < s.n, "tensor_to_image: need a 3-channel sample");
    ImageU8 img;
    img.h = s.h;
    img.w = s.w;
    img.rgb.resize(size_t(s.h) * s.w * 3);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::lround((double(t.at(sample, c, y, x)) + 1.0) * 127.5);
                img.rgb[(size_t(y) * img.w + x) * 3 + c] = (unsigned char)std::clamp(v, 0.0, 255.0);
            }
    return img;
}

template <typename S>
Tensor<S> resize_bilinear(const Tensor<S>& src, int out_h, int out_w) {
    const Shape s = src.shape;
    check_arg(out_h >= 1 && out_w >= 1, "resize_bilinear: bad target size");
    if (out_h == s.h && out_w == s.w) return src;
    Tensor<S> dst(Shape{s.n, s.c, out_h, out_w});
    const double ky = double(s.h) / out_h, kx = double(s.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double sy = std::clamp((y + 0.5) * ky - 0.5, 0.0, double(s.h - 1));
        const int y0 = int(sy), y1 = std::min(y0 + 1, s.h - 1);
        const double fy = sy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double sx = std::clamp((x + 0.5) * kx - 0.5, 0.0, double(s.w - 1));
            const int x0 = int(sx), x1 = std::min(x0 + 1, s.w - 1);
            const double fx = sx - x0;
            for (int n = 0; n < s.n; ++n)
                for (int c = 0; c < s.c; ++c) {
                    const double v = (1 - fy) * ((1 - fx) * src.at(n, c, y0, x0) + fx * src.at(n, c, y0, x1)) +
                                     fy * ((1 - fx) * src.at(n, c, y1, x0) + fx * src.at(n, c, y1, x1));
                    dst.at(n, c, y, x) = S(v);
                }
        }
    }
    return dst;
}

template Tensor<float> resize_bilinear<float>(const Tensor<float>&, int, int);
template Tensor<double> resize_bilinear<double>(const Tensor<double>&, int, int);

ImageU8 montage(const TensorF& batch, int cols) {
    const Shape s = batch.shape;
    check_arg(s.n >= 1 && s.c == 3 && cols >= 1, "montage: need 3-channel samples");
    const int rows = (s.n + cols - 1) / cols, gap = 2;
    ImageU8 grid;
    grid.h = rows * s.h + (rows - 1) * gap;
    grid.w = cols * s.w + (cols - 1) * gap;
    grid.rgb.assign(size_t(grid.h) * grid.w * 3, 0);
    for (int n = 0; n < s.n; ++n) {
        const ImageU8 cell = tensor_to_image(batch, n);
        const int oy = (n / cols) * (s.h + gap), ox = (n % cols) * (s.w + gap);
        for (int y = 0; y < s.h; ++y)
            std::memcpy(grid.rgb.data() + ((size_t(oy) + y) * grid.w + ox) * 3,
                        cell.rgb.data() + size_t(y) * s.w * 3, size_t(s.w) * 3);
    }
    return grid;
}

}  // namespace sivgan

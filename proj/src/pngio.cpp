#include "s3tta/pngio.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace s3tta {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const std::string& reason) {
    throw std::runtime_error("png: " + path + ": " + reason);
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

void read_rows(const std::string& path, PngReader& r, std::vector<png_bytep>& rows) {
    if (setjmp(png_jmpbuf(r.png))) fail(path, "corrupt or truncated data");
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
}

}  // namespace

Image read_image_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail(path, "cannot open file");

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) fail(path, "png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) fail(path, "png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) fail(path, "not a valid PNG file");

    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);

    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    const int depth = png_get_bit_depth(r.png, r.info);
    const int color = png_get_color_type(r.png, r.info);

    if (depth != 8) fail(path, "expected 8-bit image data");
    int c;
    if (color == PNG_COLOR_TYPE_GRAY) {
        c = 1;
    } else if (color == PNG_COLOR_TYPE_RGB) {
        c = 3;
    } else {
        fail(path, "expected grayscale or RGB color type");
    }
    png_read_update_info(r.png, r.info);

    std::vector<png_byte> buf(static_cast<std::size_t>(h) * w * c);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * c;
    read_rows(path, r, rows);

    Image img(h, w, c);
    for (std::size_t i = 0; i < buf.size(); ++i) img.px[i] = static_cast<float>(buf[i]) / 255.0f;
    return img;
}

void write_image_png(const std::string& path, const Image& img) {
    if (img.c != 1 && img.c != 3) fail(path, "image must have 1 or 3 channels");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail(path, "cannot open file for writing");

    PngWriter wr;
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wr.png) fail(path, "png_create_write_struct failed");
    wr.info = png_create_info_struct(wr.png);
    if (!wr.info) fail(path, "png_create_info_struct failed");
    if (setjmp(png_jmpbuf(wr.png))) fail(path, "write failed");

    png_init_io(wr.png, fp.get());
    png_set_IHDR(wr.png, wr.info, img.w, img.h, 8,
                 img.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);

    std::vector<png_byte> buf(img.px.size());
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        const float v = img.px[i];
        buf[i] = static_cast<png_byte>(std::lround(std::fmin(std::fmax(v, 0.0f), 1.0f) * 255.0f));
    }
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] = buf.data() + static_cast<std::size_t>(y) * img.w * img.c;
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

LabelMap read_label_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail(path, "cannot open file");

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) fail(path, "png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) fail(path, "png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) fail(path, "not a valid PNG file");

    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);

    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    if (png_get_bit_depth(r.png, r.info) != 16) fail(path, "expected 16-bit label data");
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY)
        fail(path, "expected single-channel label data");
    png_read_update_info(r.png, r.info);

    std::vector<png_byte> buf(static_cast<std::size_t>(h) * w * 2);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * w * 2;
    read_rows(path, r, rows);

    LabelMap lab(h, w);
    for (std::size_t i = 0; i < lab.v.size(); ++i) {
        // PNG stores 16-bit samples big-endian
        lab.v[i] = static_cast<std::int32_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
    return lab;
}

void write_label_png(const std::string& path, const LabelMap& labels) {
    if (labels.max_label() > 65535) fail(path, "label id exceeds 16-bit range");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail(path, "cannot open file for writing");

    PngWriter wr;
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wr.png) fail(path, "png_create_write_struct failed");
    wr.info = png_create_info_struct(wr.png);
    if (!wr.info) fail(path, "png_create_info_struct failed");
    if (setjmp(png_jmpbuf(wr.png))) fail(path, "write failed");

    png_init_io(wr.png, fp.get());
    png_set_IHDR(wr.png, wr.info, labels.w, labels.h, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);

    std::vector<png_byte> buf(labels.v.size() * 2);
    for (std::size_t i = 0; i < labels.v.size(); ++i) {
        const auto v = static_cast<std::uint16_t>(labels.v[i]);
        buf[2 * i] = static_cast<png_byte>(v >> 8);
        buf[2 * i + 1] = static_cast<png_byte>(v & 0xff);
    }
    std::vector<png_bytep> rows(labels.h);
    for (int y = 0; y < labels.h; ++y)
        rows[y] = buf.data() + static_cast<std::size_t>(y) * labels.w * 2;
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

}  // namespace s3tta

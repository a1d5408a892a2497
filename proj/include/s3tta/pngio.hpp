#pragma once

#include <string>

#include "s3tta/image.hpp"

namespace s3tta {

/// 8-bit grayscale or RGB PNG -> Image with values v/255.
Image read_image_png(const std::string& path);

/// Image -> 8-bit PNG (1 or 3 channel); values are quantized round(v*255).
void write_image_png(const std::string& path, const Image& img);

/// 16-bit single-channel PNG -> LabelMap.
LabelMap read_label_png(const std::string& path);

/// LabelMap -> 16-bit single-channel PNG; labels must fit in uint16.
void write_label_png(const std::string& path, const LabelMap& labels);

}  // namespace s3tta

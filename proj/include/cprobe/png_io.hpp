#pragma once

#include <png.h>

#include <filesystem>
#include <string>
#include <vector>

#include "cprobe/error.hpp"
#include "cprobe/raster.hpp"

namespace cprobe {

// Reads an 8-bit grayscale or RGB PNG. Palette, alpha and 16-bit files are
// rejected rather than converted.
inline RasterImage read_raster(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw FormatError(path.string() + ": " + image.message);

    const auto fail = [&](const std::string& why) {
        png_image_free(&image);
        throw FormatError(path.string() + ": " + why);
    };
    if (image.format & PNG_FORMAT_FLAG_LINEAR) fail("only 8-bit PNG is supported");
    if (image.format & PNG_FORMAT_FLAG_COLORMAP) fail("palette PNG is not supported");
    if (image.format & PNG_FORMAT_FLAG_ALPHA) fail("PNG with alpha is not supported");

    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr))
        throw FormatError(path.string() + ": " + image.message);
    return RasterImage(static_cast<int>(image.width), static_cast<int>(image.height), channels,
                       std::move(data));
}

inline void write_raster(const RasterImage& img, const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data().data(), 0, nullptr))
        throw Error("cannot write " + path.string() + ": " + image.message);
}

}  // namespace cprobe

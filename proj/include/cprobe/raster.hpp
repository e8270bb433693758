#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cprobe/error.hpp"

namespace cprobe {

// H x W x C grid of 8-bit samples, row-major, channel-interleaved.
class RasterImage {
public:
    RasterImage() = default;

    RasterImage(int width, int height, int channels, std::uint8_t value = 0)
        : RasterImage(width, height, channels,
                      std::vector<std::uint8_t>(checked_size(width, height, channels), value)) {}

    RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data)
        : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
        if (data_.size() != checked_size(width, height, channels))
            throw ValidationError("raster data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(width) + "x" +
                                  std::to_string(height) + "x" + std::to_string(channels));
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::span<std::uint8_t> data() noexcept { return data_; }

    std::size_t offset(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_);
    }
    std::uint8_t at(int x, int y, int c) const noexcept { return data_[offset(x, y) + c]; }
    std::uint8_t& at(int x, int y, int c) noexcept { return data_[offset(x, y) + c]; }

    bool same_shape(const RasterImage& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    static std::size_t checked_size(int width, int height, int channels) {
        if (width < 1 || height < 1)
            throw ValidationError("raster dimensions must be positive");
        if (channels != 1 && channels != 3)
            throw ValidationError("raster must have 1 or 3 channels, got " + std::to_string(channels));
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(channels);
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> data_;
};

// H x W binary selection. Stored one byte per pixel, values 0/1.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(int width, int height, bool value = false)
        : width_(width), height_(height),
          bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), value ? 1 : 0) {
        if (width < 1 || height < 1) throw ValidationError("mask dimensions must be positive");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool at(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v) noexcept { bits_[index(x, y)] = v ? 1 : 0; }
    bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
    void set(std::size_t i, bool v) noexcept { bits_[i] = v ? 1 : 0; }

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }

    RegionMask complement() const {
        RegionMask out = *this;
        for (auto& b : out.bits_) b = b ? 0 : 1;
        return out;
    }

    bool same_shape(const RegionMask& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }
    bool matches(const RasterImage& img) const noexcept {
        return width_ == img.width() && height_ == img.height();
    }

    friend bool operator==(const RegionMask&, const RegionMask&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

// Half-open pixel rectangle [x0, x1) x [y0, y1), already inside an image.
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

// Detector box: top-left inclusive corner plus extent. May overflow the image.
struct BBox {
    int x0 = 0, y0 = 0, w = 1, h = 1;

    // Grow (positive) or shrink (negative) by `by` pixels on every side, then
    // intersect with a width x height frame. nullopt when nothing remains.
    std::optional<PixelRect> resized_clamped(int by, int width, int height) const noexcept {
        long long ax = static_cast<long long>(x0) - by;
        long long ay = static_cast<long long>(y0) - by;
        long long bx = static_cast<long long>(x0) + w + by;
        long long by_ = static_cast<long long>(y0) + h + by;
        PixelRect r{static_cast<int>(std::clamp<long long>(ax, 0, width)),
                    static_cast<int>(std::clamp<long long>(ay, 0, height)),
                    static_cast<int>(std::clamp<long long>(bx, 0, width)),
                    static_cast<int>(std::clamp<long long>(by_, 0, height))};
        if (r.empty()) return std::nullopt;
        return r;
    }

    std::optional<PixelRect> clamped(int width, int height) const noexcept {
        return resized_clamped(0, width, height);
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

struct LabeledBox {
    BBox box;
    std::string label;
    friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

// Smallest rectangle holding every set bit; nullopt for an empty mask.
inline std::optional<PixelRect> bounding_rect(const RegionMask& mask) {
    PixelRect r{mask.width(), mask.height(), 0, 0};
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y)) {
                r.x0 = std::min(r.x0, x);
                r.y0 = std::min(r.y0, y);
                r.x1 = std::max(r.x1, x + 1);
                r.y1 = std::max(r.y1, y + 1);
            }
    if (r.empty()) return std::nullopt;
    return r;
}

}  // namespace cprobe

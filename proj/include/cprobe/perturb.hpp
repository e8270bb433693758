#pragma once

// Content perturbations acting on an object/context split of an image:
// content amount (keep a dilated/eroded box region), jigsaw tile shuffling
// and Gaussian blur, plus the paste-back compositing they share.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cprobe/error.hpp"
#include "cprobe/raster.hpp"
#include "cprobe/rng.hpp"

namespace cprobe {

enum class Target { Object, Context };
enum class Family { Amount, Jigsaw, Blur, Texture };
enum class Fill { Gray128, MeanColor, Black };

inline std::string_view to_string(Target t) { return t == Target::Object ? "object" : "context"; }

inline std::string_view to_string(Family f) {
    switch (f) {
        case Family::Amount: return "amount";
        case Family::Jigsaw: return "jigsaw";
        case Family::Blur: return "blur";
        case Family::Texture: return "texture";
    }
    return "?";
}

inline std::string_view to_string(Fill f) {
    switch (f) {
        case Fill::Gray128: return "gray";
        case Fill::MeanColor: return "mean";
        case Fill::Black: return "black";
    }
    return "?";
}

inline Target parse_target(std::string_view s) {
    if (s == "object") return Target::Object;
    if (s == "context") return Target::Context;
    throw ParameterError("unknown target '" + std::string(s) + "'");
}

inline Family parse_family(std::string_view s) {
    if (s == "amount") return Family::Amount;
    if (s == "jigsaw") return Family::Jigsaw;
    if (s == "blur") return Family::Blur;
    if (s == "texture") return Family::Texture;
    throw ParameterError("unknown family '" + std::string(s) + "'");
}

inline Fill parse_fill(std::string_view s) {
    if (s == "gray") return Fill::Gray128;
    if (s == "mean") return Fill::MeanColor;
    if (s == "black") return Fill::Black;
    throw ParameterError("unknown fill '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Level schedules. x runs from most perturbed (0) to closest to the original.
// ---------------------------------------------------------------------------

constexpr int max_level(Family f) noexcept {
    switch (f) {
        case Family::Amount: return 8;
        case Family::Jigsaw: return 5;
        case Family::Blur: return 5;
        case Family::Texture: return 2;
    }
    return 0;
}

inline void check_level(Family f, int x) {
    if (x < 0 || x > max_level(f))
        throw ParameterError("level " + std::to_string(x) + " outside [0, " + std::to_string(max_level(f)) +
                             "] for family " + std::string(to_string(f)));
}

// Box growth e for the amount family: 0 at x = 0, 2^x for x in [1, 7].
// nullopt at x = 8, where the full image is kept.
inline std::optional<int> amount_margin(int x) {
    check_level(Family::Amount, x);
    if (x == 8) return std::nullopt;
    return x == 0 ? 0 : 1 << x;
}

// Tiles per side g = 2^(5 - x).
inline int jigsaw_tiles(int x) {
    check_level(Family::Jigsaw, x);
    return 1 << (5 - x);
}

// Gaussian standard deviation sigma = 2^(5 - x).
inline double blur_sigma(int x) {
    check_level(Family::Blur, x);
    return static_cast<double>(1 << (5 - x));
}

struct PerturbationSpec {
    Target target = Target::Object;
    Family family = Family::Amount;
    int level = 0;
    std::uint64_t seed = 0;
    Fill fill = Fill::Gray128;

    void validate() const { check_level(family, level); }
};

// ---------------------------------------------------------------------------
// Masks and compositing
// ---------------------------------------------------------------------------

// Object: union of the boxes grown by e on every side. Context: complement
// of the union of the boxes shrunk by e (boxes that shrink away vanish).
inline RegionMask region_mask(std::span<const BBox> boxes, Target target, int e, int width, int height) {
    if (width < 1 || height < 1) throw ParameterError("mask dimensions must be positive");
    if (e < 0) throw ParameterError("margin must be non-negative");
    if (target == Target::Object && boxes.empty())
        throw EmptyRegionError("no bounding boxes: object region is empty");

    RegionMask mask(width, height, false);
    const int by = target == Target::Object ? e : -e;
    for (const auto& b : boxes) {
        auto r = b.resized_clamped(by, width, height);
        if (!r) continue;
        for (int y = r->y0; y < r->y1; ++y)
            for (int x = r->x0; x < r->x1; ++x) mask.set(x, y, true);
    }
    return target == Target::Object ? mask : mask.complement();
}

inline RasterImage composite(const RasterImage& base, const RasterImage& modified, const RegionMask& mask) {
    if (!base.same_shape(modified) || !mask.matches(base))
        throw ValidationError("composite: image and mask dimensions differ");
    RasterImage out = base;
    const int c = base.channels();
    auto dst = out.data();
    auto src = modified.data();
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i])
            for (int k = 0; k < c; ++k) dst[i * c + k] = src[i * c + k];
    return out;
}

inline std::array<std::uint8_t, 3> fill_color(const RasterImage& image, Fill fill) {
    switch (fill) {
        case Fill::Gray128: return {128, 128, 128};
        case Fill::Black: return {0, 0, 0};
        case Fill::MeanColor: {
            std::array<std::uint64_t, 3> sums{};
            const int c = image.channels();
            auto d = image.data();
            for (std::size_t i = 0; i < image.pixel_count(); ++i)
                for (int k = 0; k < c; ++k) sums[k] += d[i * c + k];
            std::array<std::uint8_t, 3> out{};
            const auto n = static_cast<double>(image.pixel_count());
            for (int k = 0; k < 3; ++k)
                out[k] = static_cast<std::uint8_t>(std::round(static_cast<double>(sums[k < c ? k : 0]) / n));
            return out;
        }
    }
    return {128, 128, 128};
}

// Pixels outside `keep` are replaced by the fill color.
inline RasterImage apply_fill(const RasterImage& image, const RegionMask& keep, Fill fill) {
    if (!keep.matches(image)) throw ValidationError("fill: mask dimensions differ from image");
    const auto color = fill_color(image, fill);
    RasterImage out = image;
    const int c = image.channels();
    auto d = out.data();
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (!keep[i])
            for (int k = 0; k < c; ++k) d[i * c + k] = color[k];
    return out;
}

// ---------------------------------------------------------------------------
// Content amount
// ---------------------------------------------------------------------------

inline RegionMask amount_mask(std::span<const BBox> boxes, Target target, int x, int width, int height) {
    auto e = amount_margin(x);
    if (!e) return RegionMask(width, height, true);
    return region_mask(boxes, target, *e, width, height);
}

inline RasterImage content_amount(const RasterImage& image, std::span<const BBox> boxes,
                                  const PerturbationSpec& spec) {
    if (spec.family != Family::Amount) throw ParameterError("content_amount needs the amount family");
    spec.validate();
    if (spec.level == 8) return image;
    return apply_fill(image, amount_mask(boxes, spec.target, spec.level, image.width(), image.height()),
                      spec.fill);
}

// ---------------------------------------------------------------------------
// Jigsaw
// ---------------------------------------------------------------------------

struct JigsawPlan {
    int tiles_per_side = 1;
    std::vector<PixelRect> cells;      // g*g grid cells, row-major
    std::vector<std::size_t> selected; // cells whose mask overlap is >= 50%, row-major order
    std::vector<std::size_t> source;   // cell selected[i] receives the tile from cell source[i]
};

// Tiles the full frame into a g x g grid (last row/column absorb the
// remainder) and draws one uniform permutation of the selected tiles.
inline JigsawPlan plan_jigsaw(const RegionMask& mask, int g, std::uint64_t seed) {
    const int w = mask.width(), h = mask.height();
    if (g < 1) throw ParameterError("jigsaw needs at least one tile per side");
    if (g > std::min(w, h))
        throw ParameterError("jigsaw grid " + std::to_string(g) + "x" + std::to_string(g) +
                             " exceeds image size " + std::to_string(w) + "x" + std::to_string(h));
    JigsawPlan plan;
    plan.tiles_per_side = g;
    const int bw = w / g, bh = h / g;
    for (int ty = 0; ty < g; ++ty)
        for (int tx = 0; tx < g; ++tx)
            plan.cells.push_back(PixelRect{tx * bw, ty * bh, tx == g - 1 ? w : (tx + 1) * bw,
                                           ty == g - 1 ? h : (ty + 1) * bh});
    for (std::size_t i = 0; i < plan.cells.size(); ++i) {
        const auto& r = plan.cells[i];
        std::size_t inside = 0;
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x) inside += mask.at(x, y) ? 1 : 0;
        const auto area = static_cast<std::size_t>(r.width()) * static_cast<std::size_t>(r.height());
        if (2 * inside >= area) plan.selected.push_back(i);
    }
    std::vector<std::size_t> order(plan.selected.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    plan.source.reserve(order.size());
    for (auto o : order) plan.source.push_back(plan.selected[o]);
    return plan;
}

inline RasterImage jigsaw(const RasterImage& image, const RegionMask& mask, int g, std::uint64_t seed) {
    if (!mask.matches(image)) throw ValidationError("jigsaw: mask dimensions differ from image");
    const auto plan = plan_jigsaw(mask, g, seed);
    RasterImage out = image;
    const int c = image.channels();
    for (std::size_t i = 0; i < plan.selected.size(); ++i) {
        const auto& dst = plan.cells[plan.selected[i]];
        const auto& src = plan.cells[plan.source[i]];
        // Anchor at the top-left; a larger destination keeps its own pixels
        // where the source tile runs out.
        const int cw = std::min(dst.width(), src.width());
        const int ch = std::min(dst.height(), src.height());
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x)
                for (int k = 0; k < c; ++k) out.at(dst.x0 + x, dst.y0 + y, k) = image.at(src.x0 + x, src.y0 + y, k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian blur
// ---------------------------------------------------------------------------

// Normalized 1-D kernel over [-r, r] with r = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("blur sigma must be positive");
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-static_cast<double>(i) * i / (2.0 * sigma * sigma));
        sum += k[i + r];
    }
    for (auto& v : k) v /= sum;
    return k;
}

inline std::uint8_t to_u8(double v) noexcept {
    // std::round is half-away-from-zero.
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

// Separable blur of the whole frame with edge replication, in double precision.
inline RasterImage gaussian_blur(const RasterImage& image, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int w = image.width(), h = image.height(), c = image.channels();
    std::vector<double> tmp(image.data().size());
    const auto idx = [&](int x, int y, int ch) {
        return (static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * c + ch;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * image.at(std::clamp(x + i, 0, w - 1), y, ch);
                tmp[idx(x, y, ch)] = acc;
            }
    RasterImage out(w, h, c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[idx(x, std::clamp(y + i, 0, h - 1), ch)];
                out.at(x, y, ch) = to_u8(acc);
            }
    return out;
}

inline RasterImage gaussian_blur_region(const RasterImage& image, const RegionMask& mask, double sigma) {
    if (!mask.matches(image)) throw ValidationError("blur: mask dimensions differ from image");
    return composite(image, gaussian_blur(image, sigma), mask);
}

}  // namespace cprobe

#pragma once

// f(I, t, x): one entry point for every perturbation family.

#include <span>
#include <string>

#include "cprobe/perturb.hpp"
#include "cprobe/texsynth.hpp"

namespace cprobe {

// Component selected by a target with no box growth: the box union for
// Object, everything outside it for Context.
inline RegionMask target_mask(std::span<const BBox> boxes, Target target, int width, int height) {
    return region_mask(boxes, target, 0, width, height);
}

inline RasterImage apply_perturbation(const RasterImage& image, std::span<const BBox> boxes,
                                      const PerturbationSpec& spec, TextureOptions tex = {}) {
    spec.validate();
    switch (spec.family) {
        case Family::Amount:
            return content_amount(image, boxes, spec);
        case Family::Jigsaw: {
            const auto mask = target_mask(boxes, spec.target, image.width(), image.height());
            return composite(image, jigsaw(image, mask, jigsaw_tiles(spec.level), spec.seed), mask);
        }
        case Family::Blur: {
            const auto mask = target_mask(boxes, spec.target, image.width(), image.height());
            return gaussian_blur_region(image, mask, blur_sigma(spec.level));
        }
        case Family::Texture: {
            const auto mask = target_mask(boxes, spec.target, image.width(), image.height());
            tex.fill = spec.fill;
            return texture_region(image, mask, spec.level, spec.seed, tex);
        }
    }
    throw ParameterError("unknown perturbation family");
}

// Output name for a perturbed record: <image_id>__<family><level>_<target>.png
inline std::string perturbed_name(const std::string& image_id, const PerturbationSpec& spec) {
    return image_id + "__" + std::string(to_string(spec.family)) + std::to_string(spec.level) + "_" +
           std::string(to_string(spec.target)) + ".png";
}

}  // namespace cprobe

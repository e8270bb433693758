#pragma once

// Synthetic intent fixture: each image carries one object box painted with
// its class's color (plus pixel noise) on a context of uniform RGB noise
// that says nothing about the class. Some records get a minority annotator
// vote for another class so targets are genuinely soft.

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cprobe/manifest.hpp"
#include "cprobe/perturb.hpp"
#include "cprobe/png_io.hpp"
#include "cprobe/rng.hpp"

namespace cprobe {

struct SyntheticConfig {
    std::size_t images = 500;
    int classes = 4;
    int size = 64;
    int min_box = 14;
    int max_box = 30;
    double object_noise = 40.0;    // std of per-pixel noise inside the object
    double minority_vote = 0.2;    // probability of one dissenting annotator
    int annotators = 3;
    std::uint64_t seed = 1;
};

inline std::string synthetic_class_name(int c) { return "class" + std::to_string(c); }

inline std::array<double, 3> synthetic_class_color(int c) {
    static constexpr std::array<std::array<double, 3>, 8> colors{{{200, 60, 60},
                                                                   {60, 190, 70},
                                                                   {70, 80, 210},
                                                                   {210, 200, 60},
                                                                   {190, 70, 200},
                                                                   {60, 200, 200},
                                                                   {230, 140, 40},
                                                                   {120, 120, 120}}};
    return colors[static_cast<std::size_t>(c) % colors.size()];
}

// Writes images/<id>.png and manifest.jsonl under `dir`; returns the records.
inline std::vector<ManifestRecord> generate_synthetic(const std::filesystem::path& dir, const SyntheticConfig& cfg) {
    if (cfg.classes < 2) throw ParameterError("synthetic fixture needs at least two classes");
    if (cfg.min_box < 1 || cfg.max_box < cfg.min_box || cfg.max_box > cfg.size)
        throw ParameterError("bad synthetic box size range");
    std::filesystem::create_directories(dir / "images");
    Rng rng(cfg.seed);
    std::vector<ManifestRecord> records;
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
    if (!manifest) throw Error("cannot write " + (dir / "manifest.jsonl").string());

    for (std::size_t i = 0; i < cfg.images; ++i) {
        const int cls = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.classes)));
        const int bw = cfg.min_box + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_box - cfg.min_box + 1)));
        const int bh = cfg.min_box + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_box - cfg.min_box + 1)));
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.size - bw + 1)));
        const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.size - bh + 1)));

        RasterImage img(cfg.size, cfg.size, 3);
        for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.below(256));
        const auto color = synthetic_class_color(cls);
        for (int y = y0; y < y0 + bh; ++y)
            for (int x = x0; x < x0 + bw; ++x)
                for (int c = 0; c < 3; ++c) img.at(x, y, c) = to_u8(color[c] + cfg.object_noise * rng.normal());

        ManifestRecord r;
        char id[32];
        std::snprintf(id, sizeof id, "syn%05zu", i);
        r.image_id = id;
        r.image_path = "images/" + r.image_id + ".png";
        r.bboxes.push_back({BBox{x0, y0, bw, bh}, "object"});
        r.annotator_total = cfg.annotators;
        if (rng.uniform() < cfg.minority_vote) {
            int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.classes - 1)));
            if (other >= cls) ++other;
            r.label_counts[synthetic_class_name(cls)] = cfg.annotators - 1;
            r.label_counts[synthetic_class_name(other)] = 1;
        } else {
            r.label_counts[synthetic_class_name(cls)] = cfg.annotators;
        }
        write_raster(img, dir / r.image_path);
        manifest << to_json_line(r) << '\n';
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace cprobe

#pragma once

// Built-in image featurizer used when no external features are supplied:
// a grid x grid block-mean thumbnail per channel followed by a per-channel
// intensity histogram, all scaled to [0, 1].

#include <cstdint>
#include <vector>

#include "cprobe/probe.hpp"
#include "cprobe/raster.hpp"

namespace cprobe {

struct FeaturizerConfig {
    int grid = 8;
    int bins = 16;
    std::size_t dim(int channels) const {
        return static_cast<std::size_t>(channels) * (static_cast<std::size_t>(grid) * grid + bins);
    }
};

inline std::vector<double> featurize(const RasterImage& img, const FeaturizerConfig& cfg = {}) {
    const int w = img.width(), h = img.height(), c = img.channels();
    std::vector<double> out;
    out.reserve(cfg.dim(c));
    for (int ch = 0; ch < c; ++ch) {
        for (int gy = 0; gy < cfg.grid; ++gy)
            for (int gx = 0; gx < cfg.grid; ++gx) {
                const int x0 = gx * w / cfg.grid, x1 = std::max(x0 + 1, (gx + 1) * w / cfg.grid);
                const int y0 = gy * h / cfg.grid, y1 = std::max(y0 + 1, (gy + 1) * h / cfg.grid);
                std::uint64_t s = 0, n = 0;
                for (int y = y0; y < std::min(y1, h); ++y)
                    for (int x = x0; x < std::min(x1, w); ++x) {
                        s += img.at(x, y, ch);
                        ++n;
                    }
                out.push_back(n ? static_cast<double>(s) / (255.0 * static_cast<double>(n)) : 0.0);
            }
        std::vector<std::uint64_t> hist(static_cast<std::size_t>(cfg.bins), 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) ++hist[static_cast<std::size_t>(img.at(x, y, ch) * cfg.bins / 256)];
        for (auto v : hist) out.push_back(static_cast<double>(v) / static_cast<double>(img.pixel_count()));
    }
    return out;
}

// Column-wise z-scoring fitted on one matrix and applied to others.
struct Standardizer {
    std::vector<double> mean, scale;

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        s.mean.assign(x.cols, 0.0);
        s.scale.assign(x.cols, 1.0);
        if (x.rows == 0) return s;
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += x(i, j);
        for (auto& m : s.mean) m /= static_cast<double>(x.rows);
        for (std::size_t j = 0; j < x.cols; ++j) {
            double ss = 0.0;
            for (std::size_t i = 0; i < x.rows; ++i) ss += (x(i, j) - s.mean[j]) * (x(i, j) - s.mean[j]);
            const double sd = std::sqrt(ss / static_cast<double>(x.rows));
            s.scale[j] = sd > 1e-8 ? 1.0 / sd : 1.0;
        }
        return s;
    }

    void apply(Matrix& x) const {
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t j = 0; j < x.cols; ++j) x(i, j) = (x(i, j) - mean[j]) * scale[j];
    }
};

}  // namespace cprobe

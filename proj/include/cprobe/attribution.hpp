#pragma once

// Intent <-> panoptic-class correlation. For one image with intent label m
// and panoptic class p, the correlation is the fraction of p's thresholded
// pixels covered by m's thresholded CAM:
//
//   corr(p, m) = |CAM_b(m, tau_cam) & Pano(p, tau_p)| / |Pano(p, tau_p)|
//
// Across a corpus the matrix cell is the mean of per-image values over images
// that carry m as a ground-truth label and in which p is present.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cprobe/csv.hpp"
#include "cprobe/error.hpp"
#include "cprobe/raster.hpp"
#include "cprobe/tensor.hpp"

namespace cprobe {

// Per-pixel activation or class score in [0, 1].
class HeatMap {
public:
    HeatMap() = default;
    HeatMap(int width, int height, std::vector<float> values)
        : width_(width), height_(height), values_(std::move(values)) {
        if (width < 1 || height < 1) throw ValidationError("heat map dimensions must be positive");
        if (values_.size() != static_cast<std::size_t>(width) * height)
            throw ValidationError("heat map value count does not match its dimensions");
        for (float v : values_)
            if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
                throw ValidationError("heat map values must be finite and within [0, 1]");
    }

    // From a rank-2 (H x W) tensor.
    static HeatMap from_tensor(const Tensor& t) {
        if (t.rank() != 2) throw ValidationError("heat map tensor must have shape HxW");
        return HeatMap(static_cast<int>(t.dim(1)), static_cast<int>(t.dim(0)),
                       std::vector<float>(t.data().begin(), t.data().end()));
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const std::vector<float>& values() const noexcept { return values_; }

private:
    int width_ = 0, height_ = 0;
    std::vector<float> values_;
};

struct AttributionConfig {
    double tau_cam = 0.6;  // fraction of the per-map maximum
    double tau_p = 0.5;    // absolute score threshold
    bool pooled = false;   // pooled pixel ratio instead of mean of per-image ratios

    void validate() const {
        if (!(tau_cam > 0.0 && tau_cam <= 1.0)) throw ParameterError("tau_cam must lie in (0, 1]");
        if (!(tau_p > 0.0 && tau_p <= 1.0)) throw ParameterError("tau_p must lie in (0, 1]");
    }
};

inline RegionMask binarize_cam(const HeatMap& heat, double tau_cam) {
    RegionMask mask(heat.width(), heat.height(), false);
    const auto& v = heat.values();
    const float peak = *std::max_element(v.begin(), v.end());
    if (peak <= 0.0f) return mask;
    const double cut = tau_cam * static_cast<double>(peak);
    for (std::size_t i = 0; i < v.size(); ++i) mask.set(i, static_cast<double>(v[i]) >= cut);
    return mask;
}

inline RegionMask binarize_pano(const HeatMap& score, double tau_p) {
    RegionMask mask(score.width(), score.height(), false);
    const auto& v = score.values();
    for (std::size_t i = 0; i < v.size(); ++i) mask.set(i, static_cast<double>(v[i]) >= tau_p);
    return mask;
}

struct OverlapCounts {
    std::size_t intersection = 0;
    std::size_t pano = 0;
};

inline OverlapCounts overlap(const RegionMask& cam, const RegionMask& pano) {
    if (!cam.same_shape(pano)) throw ValidationError("correlation: mask dimensions differ");
    OverlapCounts c;
    for (std::size_t i = 0; i < pano.size(); ++i)
        if (pano[i]) {
            ++c.pano;
            if (cam[i]) ++c.intersection;
        }
    return c;
}

// nullopt when the panoptic mask is empty.
inline std::optional<double> correlation(const RegionMask& cam, const RegionMask& pano) {
    const auto c = overlap(cam, pano);
    if (c.pano == 0) return std::nullopt;
    return static_cast<double>(c.intersection) / static_cast<double>(c.pano);
}

struct CorrelationMatrix {
    std::vector<std::string> pano_classes;    // rows
    std::vector<std::string> intent_classes;  // columns
    std::vector<std::optional<double>> values;
    std::vector<std::size_t> support;

    std::size_t index(std::size_t p, std::size_t m) const { return p * intent_classes.size() + m; }
    const std::optional<double>& value(std::size_t p, std::size_t m) const { return values.at(index(p, m)); }
    std::size_t support_at(std::size_t p, std::size_t m) const { return support.at(index(p, m)); }

    std::optional<double> lookup(const std::string& p, const std::string& m) const {
        auto pi = std::find(pano_classes.begin(), pano_classes.end(), p);
        auto mi = std::find(intent_classes.begin(), intent_classes.end(), m);
        if (pi == pano_classes.end() || mi == intent_classes.end()) return std::nullopt;
        return value(static_cast<std::size_t>(pi - pano_classes.begin()),
                     static_cast<std::size_t>(mi - intent_classes.begin()));
    }
};

struct AttributionSample {
    std::string image_id;
    std::vector<std::string> intent_labels;
    std::map<std::string, HeatMap> cams;   // keyed by intent class
    std::map<std::string, HeatMap> panos;  // keyed by panoptic class
};

struct SkippedImage {
    std::string image_id;
    std::string reason;
};

struct CorrelationResult {
    CorrelationMatrix matrix;
    std::vector<SkippedImage> skipped;
};

// Builds the corpus matrix. A per-image failure aborts with an error naming
// the image unless `permissive` is set, in which case the image is skipped
// and reported.
inline CorrelationResult correlation_matrix(const std::vector<AttributionSample>& samples,
                                            const AttributionConfig& cfg, bool permissive = false) {
    cfg.validate();
    std::set<std::string> intents, panos;
    for (const auto& s : samples) {
        intents.insert(s.intent_labels.begin(), s.intent_labels.end());
        for (const auto& [p, map] : s.panos) panos.insert(p);
    }
    CorrelationResult res;
    auto& mx = res.matrix;
    mx.pano_classes.assign(panos.begin(), panos.end());
    mx.intent_classes.assign(intents.begin(), intents.end());
    const std::size_t cells = mx.pano_classes.size() * mx.intent_classes.size();
    std::vector<double> ratio_sum(cells, 0.0);
    std::vector<std::size_t> inter_sum(cells, 0), pano_sum(cells, 0);
    mx.support.assign(cells, 0);

    const auto col = [&](const std::string& m) {
        return static_cast<std::size_t>(std::lower_bound(mx.intent_classes.begin(), mx.intent_classes.end(), m) -
                                        mx.intent_classes.begin());
    };
    const auto row = [&](const std::string& p) {
        return static_cast<std::size_t>(std::lower_bound(mx.pano_classes.begin(), mx.pano_classes.end(), p) -
                                        mx.pano_classes.begin());
    };

    struct Contribution {
        std::size_t cell;
        OverlapCounts counts;
    };
    for (const auto& s : samples) {
        std::vector<Contribution> local;
        try {
            std::vector<std::pair<std::size_t, RegionMask>> pano_masks;
            for (const auto& [p, map] : s.panos) {
                auto mask = binarize_pano(map, cfg.tau_p);
                if (mask.count() > 0) pano_masks.emplace_back(row(p), std::move(mask));
            }
            for (const auto& m : s.intent_labels) {
                auto it = s.cams.find(m);
                if (it == s.cams.end()) throw ValidationError("no CAM heat map for intent class '" + m + "'");
                const auto cam = binarize_cam(it->second, cfg.tau_cam);
                for (const auto& [r, pmask] : pano_masks) {
                    if (!cam.same_shape(pmask))
                        throw ValidationError("CAM and panoptic maps have different dimensions");
                    local.push_back({r * mx.intent_classes.size() + col(m), overlap(cam, pmask)});
                }
            }
        } catch (const Error& e) {
            if (!permissive) throw Error("image '" + s.image_id + "': " + e.what());
            res.skipped.push_back({s.image_id, e.what()});
            continue;
        }
        for (const auto& c : local) {
            ratio_sum[c.cell] += static_cast<double>(c.counts.intersection) / static_cast<double>(c.counts.pano);
            inter_sum[c.cell] += c.counts.intersection;
            pano_sum[c.cell] += c.counts.pano;
            ++mx.support[c.cell];
        }
    }

    mx.values.assign(cells, std::nullopt);
    for (std::size_t i = 0; i < cells; ++i) {
        if (mx.support[i] == 0) continue;
        mx.values[i] = cfg.pooled ? static_cast<double>(inter_sum[i]) / static_cast<double>(pano_sum[i])
                                  : ratio_sum[i] / static_cast<double>(mx.support[i]);
    }
    return res;
}

// Matrix CSV: header "panoptic,<intent...>", one row per panoptic class,
// absent cells left empty. The support CSV has the same layout with counts.
inline void write_matrix_csv(const CorrelationMatrix& mx, const std::filesystem::path& values_path,
                             const std::filesystem::path& support_path) {
    std::vector<csv::Row> vals, sup;
    csv::Row header{"panoptic"};
    header.insert(header.end(), mx.intent_classes.begin(), mx.intent_classes.end());
    vals.push_back(header);
    sup.push_back(header);
    for (std::size_t p = 0; p < mx.pano_classes.size(); ++p) {
        csv::Row vr{mx.pano_classes[p]}, sr{mx.pano_classes[p]};
        for (std::size_t m = 0; m < mx.intent_classes.size(); ++m) {
            const auto& v = mx.value(p, m);
            vr.push_back(v ? csv::format(*v) : std::string());
            sr.push_back(std::to_string(mx.support_at(p, m)));
        }
        vals.push_back(std::move(vr));
        sup.push_back(std::move(sr));
    }
    csv::write(values_path, vals);
    csv::write(support_path, sup);
}

// Reads a matrix CSV back. Support is not stored in this file; cells with a
// value get support 1 and absent cells 0.
inline CorrelationMatrix read_matrix_csv(const std::filesystem::path& path) {
    const auto rows = csv::read(path);
    if (rows.empty() || rows[0].size() < 2) throw FormatError(path.string() + ": matrix CSV needs a header row");
    CorrelationMatrix mx;
    mx.intent_classes.assign(rows[0].begin() + 1, rows[0].end());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != rows[0].size())
            throw FormatError(path.string() + ": row " + std::to_string(r + 1) + " has the wrong number of fields");
        mx.pano_classes.push_back(row[0]);
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c].empty()) {
                mx.values.push_back(std::nullopt);
                mx.support.push_back(0);
            } else {
                mx.values.push_back(csv::to_double(row[c], "matrix cell"));
                mx.support.push_back(1);
            }
        }
    }
    return mx;
}

}  // namespace cprobe

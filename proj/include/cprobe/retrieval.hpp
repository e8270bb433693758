#pragma once

// R-MAC pooling of convolutional activations and an exact cosine top-k index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "cprobe/error.hpp"
#include "cprobe/raster.hpp"
#include "cprobe/tensor.hpp"

namespace cprobe {

class ActivationMap {
public:
    explicit ActivationMap(Tensor t) : t_(std::move(t)) {
        if (t_.rank() != 3 || t_.dim(0) < 1 || t_.dim(1) < 1 || t_.dim(2) < 1)
            throw ValidationError("activation tensor must have shape CxHxW with every dim >= 1");
    }
    std::size_t channels() const { return t_.dim(0); }
    std::size_t height() const { return t_.dim(1); }
    std::size_t width() const { return t_.dim(2); }
    float at(std::size_t c, std::size_t y, std::size_t x) const {
        return t_.data()[(c * height() + y) * width() + x];
    }

private:
    Tensor t_;
};

// Start offsets of regions of side `side` along an axis of length `len`:
// evenly spread from 0 to len - side with consecutive overlap >= 40% (a
// stride of at most floor(0.6 * side), never less than one pixel).
inline std::vector<int> rmac_offsets(int len, int side) {
    if (side >= len) return {0};
    const int max_stride = std::max(1, (3 * side) / 5);
    const int span = len - side;
    const int n = 1 + (span + max_stride - 1) / max_stride;
    std::vector<int> out(n);
    for (int k = 0; k < n; ++k) out[k] = static_cast<int>((static_cast<long long>(k) * span) / (n - 1));
    return out;
}

// Square regions for scales 1..L: side = floor(2 min(H, W) / (l + 1)), at least 1.
inline std::vector<PixelRect> rmac_regions(int height, int width, int scales) {
    if (scales < 1) throw ParameterError("R-MAC needs at least one scale");
    std::vector<PixelRect> regions;
    for (int l = 1; l <= scales; ++l) {
        const int side = std::max(1, (2 * std::min(height, width)) / (l + 1));
        const int sw = std::min(side, width), sh = std::min(side, height);
        for (int y : rmac_offsets(height, sh))
            for (int x : rmac_offsets(width, sw)) regions.push_back(PixelRect{x, y, x + sw, y + sh});
    }
    return regions;
}

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline std::vector<float> rmac(const ActivationMap& act, int scales) {
    const std::size_t C = act.channels();
    const auto regions = rmac_regions(static_cast<int>(act.height()), static_cast<int>(act.width()), scales);
    std::vector<double> sum(C, 0.0), region(C);
    for (const auto& r : regions) {
        for (std::size_t c = 0; c < C; ++c) {
            float m = act.at(c, r.y0, r.x0);
            for (int y = r.y0; y < r.y1; ++y)
                for (int x = r.x0; x < r.x1; ++x) m = std::max(m, act.at(c, y, x));
            region[c] = m;
        }
        const double n = l2_norm(region);
        if (n == 0.0) continue;
        for (std::size_t c = 0; c < C; ++c) sum[c] += region[c] / n;
    }
    const double n = l2_norm(sum);
    std::vector<float> out(C, 0.0f);
    if (n == 0.0) return out;
    for (std::size_t c = 0; c < C; ++c) out[c] = static_cast<float>(sum[c] / n);
    return out;
}

struct IndexItem {
    std::string id;
    std::vector<float> vector;
};

struct Neighbor {
    std::string id;
    double similarity = 0.0;
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Unit-norm vectors in insertion order.
class DescriptorIndex {
public:
    DescriptorIndex() = default;

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::span<const float> vector(std::size_t i) const {
        return std::span<const float>(data_).subspan(i * dim_, dim_);
    }

    void add(std::string id, std::span<const float> v) {
        if (ids_.empty() && dim_ == 0) dim_ = v.size();
        if (v.size() != dim_ || dim_ == 0)
            throw ValidationError("descriptor '" + id + "' has dimension " + std::to_string(v.size()) +
                                  ", index expects " + std::to_string(dim_));
        if (!seen_.insert(id).second) throw ValidationError("duplicate descriptor id '" + id + "'");
        double s = 0.0;
        for (float x : v) {
            if (!std::isfinite(x)) throw ValidationError("descriptor '" + id + "' is not finite");
            s += static_cast<double>(x) * x;
        }
        if (s == 0.0) {
            seen_.erase(id);
            throw ValidationError("descriptor '" + id + "' is a zero vector");
        }
        const double n = std::sqrt(s);
        for (float x : v) data_.push_back(static_cast<float>(x / n));
        ids_.push_back(std::move(id));
    }

    // Binary layout: "CPIDX001", u64 N, u64 D, then per item a u32 id length
    // and the id bytes, then N*D little-endian f32.
    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        out.write("CPIDX001", 8);
        put_u64(out, ids_.size());
        put_u64(out, dim_);
        for (const auto& id : ids_) {
            put_u32(out, static_cast<std::uint32_t>(id.size()));
            out.write(id.data(), static_cast<std::streamsize>(id.size()));
        }
        for (float f : data_) {
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            put_u32(out, u);
        }
        if (!out) throw Error("write failed for " + path.string());
    }

    static DescriptorIndex load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open index " + path.string());
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, "CPIDX001", 8) != 0) throw FormatError(path.string() + ": not an index file");
        const auto n = get_u64(in), d = get_u64(in);
        std::vector<std::string> ids(n);
        for (auto& id : ids) {
            id.resize(get_u32(in));
            in.read(id.data(), static_cast<std::streamsize>(id.size()));
        }
        DescriptorIndex idx;
        idx.dim_ = d;
        idx.data_.resize(n * d);
        for (auto& f : idx.data_) {
            const std::uint32_t u = get_u32(in);
            std::memcpy(&f, &u, 4);
        }
        if (!in) throw FormatError(path.string() + ": truncated index file");
        for (auto& id : ids) {
            if (!idx.seen_.insert(id).second) throw FormatError(path.string() + ": duplicate id '" + id + "'");
            idx.ids_.push_back(std::move(id));
        }
        return idx;
    }

private:
    static void put_u32(std::ostream& o, std::uint32_t v) {
        char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        o.write(b, 4);
    }
    static void put_u64(std::ostream& o, std::uint64_t v) {
        put_u32(o, static_cast<std::uint32_t>(v));
        put_u32(o, static_cast<std::uint32_t>(v >> 32));
    }
    static std::uint32_t get_u32(std::istream& in) {
        unsigned char b[4] = {};
        in.read(reinterpret_cast<char*>(b), 4);
        return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    static std::uint64_t get_u64(std::istream& in) {
        const std::uint64_t lo = get_u32(in);
        return lo | (static_cast<std::uint64_t>(get_u32(in)) << 32);
    }

    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unordered_set<std::string> seen_;
};

inline DescriptorIndex build_index(std::span<const IndexItem> items) {
    DescriptorIndex idx;
    for (const auto& it : items) idx.add(it.id, it.vector);
    return idx;
}

// Exact cosine top-k: descending similarity, ties by insertion order.
inline std::vector<Neighbor> knn_query(const DescriptorIndex& index, std::span<const float> query, std::size_t k) {
    if (index.size() == 0) throw ValidationError("knn query on an empty index");
    if (k < 1) throw ParameterError("k must be at least 1");
    if (query.size() != index.dim())
        throw ValidationError("query has dimension " + std::to_string(query.size()) + ", index has " +
                              std::to_string(index.dim()));
    double qn = 0.0;
    for (float x : query) qn += static_cast<double>(x) * x;
    qn = std::sqrt(qn);
    if (qn == 0.0) throw ValidationError("query is a zero vector");

    std::vector<double> sims(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto v = index.vector(i);
        double dot = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) dot += static_cast<double>(v[d]) * query[d];
        sims[i] = std::clamp(dot / qn, -1.0, 1.0);
    }
    std::vector<std::size_t> order(index.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); });
    std::vector<Neighbor> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({index.ids()[order[i]], sims[order[i]]});
    return out;
}

}  // namespace cprobe

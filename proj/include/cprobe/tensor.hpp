#pragma once

// Dense f32 tensors on disk: `<path>` holds raw little-endian floats and
// `<path>.shape` holds the dims as ASCII, e.g. "512x7x7".

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cprobe/error.hpp"

namespace cprobe {

class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_))
            throw FormatError("tensor payload has " + std::to_string(data_.size()) +
                              " values, shape " + shape_string(shape_) + " needs " +
                              std::to_string(element_count(shape_)));
        for (float v : data_)
            if (!std::isfinite(v)) throw ValidationError("tensor contains a non-finite value");
    }
    explicit Tensor(std::vector<std::size_t> shape, float fill = 0.0f)
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {
        if (!std::isfinite(fill)) throw ValidationError("tensor fill value is not finite");
    }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    // Row r of a rank-2 tensor.
    std::span<const float> row(std::size_t r) const {
        const std::size_t cols = shape_.at(1);
        return std::span<const float>(data_).subspan(r * cols, cols);
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        if (shape.empty()) return 0;
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
    }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::string s;
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += 'x';
            s += std::to_string(shape[i]);
        }
        return s;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

inline std::filesystem::path shape_sidecar(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".shape");
}

inline std::vector<std::size_t> parse_shape(const std::string& text) {
    std::string s = text;
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::vector<std::size_t> dims;
    std::size_t pos = 0;
    while (true) {
        const std::size_t end = s.find('x', pos);
        const std::string tok = s.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
            throw FormatError("bad shape string '" + s + "'");
        dims.push_back(static_cast<std::size_t>(std::stoull(tok)));
        if (end == std::string::npos) break;
        pos = end + 1;
    }
    return dims;
}

inline Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream sidecar(shape_sidecar(path));
    if (!sidecar) throw FormatError("missing shape sidecar for " + path.string());
    std::stringstream ss;
    ss << sidecar.rdbuf();
    auto shape = parse_shape(ss.str());

    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open tensor payload " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 4 != 0)
        throw FormatError(path.string() + ": payload is not a whole number of f32 values");
    std::vector<float> values(bytes.size() / 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t u;
        std::memcpy(&u, bytes.data() + 4 * i, 4);
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
        values[i] = std::bit_cast<float>(u);
    }
    return Tensor(std::move(shape), std::move(values));
}

inline void write_tensor(const Tensor& t, const std::filesystem::path& path) {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        for (float v : t.data()) {
            std::uint32_t u = std::bit_cast<std::uint32_t>(v);
            if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
            char b[4];
            std::memcpy(b, &u, 4);
            out.write(b, 4);
        }
        if (!out) throw Error("write failed for " + path.string());
    }
    std::ofstream side(shape_sidecar(path), std::ios::trunc);
    side << Tensor::shape_string(t.shape());
    if (!side) throw Error("write failed for " + shape_sidecar(path).string());
}

}  // namespace cprobe

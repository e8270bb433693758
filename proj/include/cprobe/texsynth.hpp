#pragma once

// Texture statistics and statistic-matching synthesis.
//
// The statistic set is reduced: per-channel marginal moments (mean, variance,
// skewness, kurtosis, min, max) plus the central autocorrelation of each
// level of a 2x2 box-filter pyramid over a (2a+1)^2 lag window. Synthesis
// starts from seeded white noise and alternates three projections per round:
//
//   1. spectral magnitude adjustment of each pyramid level towards the target
//      autocorrelation (coarse to fine, correction upsampled by replication)
//   2. moment projection: minimum-norm Newton steps on the sample multiset,
//      then rank-preserving reassignment onto the original ordering
//   3. clipping to the target [min, max]

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <numeric>
#include <optional>
#include <vector>

#include "cprobe/error.hpp"
#include "cprobe/perturb.hpp"
#include "cprobe/raster.hpp"
#include "cprobe/rng.hpp"

namespace cprobe {

struct ChannelStats {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;  // 0 for a zero-variance channel
    double kurtosis = 0.0;  // m4 / m2^2 (not excess); 0 for a zero-variance channel
    double min = 0.0;
    double max = 0.0;
    // One (2a+1)^2 row-major lag window per pyramid level, lag (0,0) at the center.
    std::vector<std::vector<double>> autocorr;
};

struct TextureStats {
    int levels = 0;
    int radius = 0;
    std::vector<ChannelStats> channels;

    double lag(int channel, int level, int dy, int dx) const {
        const int side = 2 * radius + 1;
        return channels.at(channel).autocorr.at(level).at((dy + radius) * side + (dx + radius));
    }
};

struct TextureOptions {
    int levels = 3;
    int radius = 3;
    int iterations = 10;
    Fill fill = Fill::Gray128;
};

namespace texture_detail {

// One pyramid level: values plus a validity mask.
struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;
    std::vector<std::uint8_t> m;
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
    bool ok(int x, int y) const { return m[static_cast<std::size_t>(y) * w + x] != 0; }
};

// 2x2 box filter. A coarse pixel is valid only when all four children are.
inline Plane downsample(const Plane& p) {
    Plane q;
    q.w = p.w / 2;
    q.h = p.h / 2;
    q.v.resize(static_cast<std::size_t>(q.w) * q.h);
    q.m.resize(q.v.size());
    for (int y = 0; y < q.h; ++y)
        for (int x = 0; x < q.w; ++x) {
            const int sx = 2 * x, sy = 2 * y;
            const std::size_t i = static_cast<std::size_t>(y) * q.w + x;
            q.v[i] = 0.25 * (p.at(sx, sy) + p.at(sx + 1, sy) + p.at(sx, sy + 1) + p.at(sx + 1, sy + 1));
            q.m[i] = p.ok(sx, sy) && p.ok(sx + 1, sy) && p.ok(sx, sy + 1) && p.ok(sx + 1, sy + 1);
        }
    return q;
}

inline double masked_mean(const Plane& p) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < p.v.size(); ++i)
        if (p.m[i]) {
            s += p.v[i];
            ++n;
        }
    return n ? s / static_cast<double>(n) : 0.0;
}

// Central autocorrelation normalized by the number of valid pairs per lag.
// Only half the window is summed; the other half is its mirror, so the
// result is exactly symmetric under lag negation.
inline std::vector<double> autocorrelation(const Plane& p, int a) {
    const int side = 2 * a + 1;
    std::vector<double> r(static_cast<std::size_t>(side) * side, 0.0);
    const double mu = masked_mean(p);
    for (int dy = 0; dy <= a; ++dy)
        for (int dx = -a; dx <= a; ++dx) {
            if (dy == 0 && dx < 0) continue;
            double acc = 0.0;
            std::size_t n = 0;
            for (int y = 0; y + dy < p.h; ++y)
                for (int x = std::max(0, -dx); x < p.w && x + dx < p.w; ++x) {
                    if (!p.ok(x, y) || !p.ok(x + dx, y + dy)) continue;
                    acc += (p.at(x, y) - mu) * (p.at(x + dx, y + dy) - mu);
                    ++n;
                }
            const double val = n ? acc / static_cast<double>(n) : 0.0;
            r[static_cast<std::size_t>(dy + a) * side + (dx + a)] = val;
            r[static_cast<std::size_t>(-dy + a) * side + (-dx + a)] = val;
        }
    return r;
}

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// 2-D real FFT round trip helper. FFTW planning is not thread-safe, so plan
// creation and destruction are serialized; execution is not.
class RealFft2d {
public:
    RealFft2d(int h, int w) : h_(h), w_(w), real_(static_cast<std::size_t>(h) * w), spec_(static_cast<std::size_t>(h) * (w / 2 + 1)) {
        std::lock_guard lock(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_2d(h, w, real_.data(), reinterpret_cast<fftw_complex*>(spec_.data()), FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_2d(h, w, reinterpret_cast<fftw_complex*>(spec_.data()), real_.data(), FFTW_ESTIMATE);
    }
    ~RealFft2d() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }
    RealFft2d(const RealFft2d&) = delete;
    RealFft2d& operator=(const RealFft2d&) = delete;

    std::vector<double>& real() { return real_; }
    std::vector<std::complex<double>>& spectrum() { return spec_; }
    void forward() { fftw_execute(fwd_); }
    // Unnormalized: the result is scaled by h * w.
    void inverse() { fftw_execute(inv_); }

private:
    int h_, w_;
    std::vector<double> real_;
    std::vector<std::complex<double>> spec_;
    fftw_plan fwd_{};
    fftw_plan inv_{};
};

// Power spectrum implied by a lag window: Bartlett-tapered lags wrapped onto
// an h x w torus, transformed. Lags beyond half the plane are dropped.
inline std::vector<double> window_spectrum(RealFft2d& fft, const std::vector<double>& r, int a, int h, int w) {
    const int side = 2 * a + 1;
    const int ay = std::min(a, (h - 1) / 2), ax = std::min(a, (w - 1) / 2);
    auto& buf = fft.real();
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int dy = -ay; dy <= ay; ++dy)
        for (int dx = -ax; dx <= ax; ++dx) {
            const double taper = (1.0 - std::abs(dy) / (ay + 1.0)) * (1.0 - std::abs(dx) / (ax + 1.0));
            const int yy = (dy + h) % h, xx = (dx + w) % w;
            buf[static_cast<std::size_t>(yy) * w + xx] += taper * r[static_cast<std::size_t>(dy + a) * side + (dx + a)];
        }
    fft.forward();
    std::vector<double> s(fft.spectrum().size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = fft.spectrum()[i].real();
    return s;
}

// Rescales the plane's spectrum magnitude so its windowed autocorrelation
// moves towards `target`. Returns the adjusted plane values.
inline std::vector<double> match_autocorr(const Plane& p, const std::vector<double>& target, int a) {
    RealFft2d fft(p.h, p.w);
    const auto current = autocorrelation(p, a);
    const int center = a * (2 * a + 1) + a;
    const double scale = std::max(current[center], target[center]);
    if (scale <= 0.0) return p.v;
    const double eps = 1e-3 * scale;

    const auto st = window_spectrum(fft, target, a, p.h, p.w);
    const auto sc = window_spectrum(fft, current, a, p.h, p.w);

    const double mu = masked_mean(p);
    auto& buf = fft.real();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = p.v[i] - mu;
    fft.forward();
    auto& spec = fft.spectrum();
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double gain = std::sqrt(std::max(st[i], eps) / std::max(sc[i], eps));
        spec[i] *= std::clamp(gain, 0.25, 4.0);
    }
    fft.inverse();
    const double norm = 1.0 / (static_cast<double>(p.w) * p.h);
    std::vector<double> out(buf.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i] * norm + mu;
    return out;
}

inline void solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4>& b) {
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        if (std::abs(a[col][col]) < 1e-300) {
            b[col] = 0.0;
            continue;
        }
        for (int r = col + 1; r < 4; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int k = col; k < 4; ++k) a[r][k] -= f * a[col][k];
            b[r] -= f * b[col];
        }
    }
    for (int col = 3; col >= 0; --col) {
        if (std::abs(a[col][col]) < 1e-300) {
            b[col] = 0.0;
            continue;
        }
        for (int k = col + 1; k < 4; ++k) b[col] -= a[col][k] * b[k];
        b[col] /= a[col][col];
    }
}

inline std::array<double, 4> standard_moment_residual(const std::vector<double>& z, double skew, double kurt) {
    std::array<double, 4> g{};
    for (double v : z) {
        const double v2 = v * v;
        g[0] += v;
        g[1] += v2;
        g[2] += v2 * v;
        g[3] += v2 * v2;
    }
    const double n = static_cast<double>(z.size());
    return {g[0] / n, g[1] / n - 1.0, g[2] / n - skew, g[3] / n - kurt};
}

inline double norm2(const std::array<double, 4>& g) { return g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + g[3] * g[3]; }

// Moves `values` to the target mean/variance/skewness/kurtosis while keeping
// their rank order.
inline void match_moments(std::vector<double>& values, const ChannelStats& t) {
    const std::size_t n = values.size();
    if (n == 0) return;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0 || t.variance <= 0.0) {
        std::fill(values.begin(), values.end(), t.mean);
        return;
    }
    const double sd = std::sqrt(var);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (values[i] - mean) / sd;

    // Any multiset satisfies kurtosis >= skewness^2 + 1.
    const double skew = t.skewness;
    const double kurt = std::max(t.kurtosis, skew * skew + 1.0 + 1e-6);

    auto g = standard_moment_residual(z, skew, kurt);
    std::vector<double> trial(n);
    for (int it = 0; it < 60 && norm2(g) > 1e-20; ++it) {
        // Gram matrix of the moment gradients: G[k][l] = sum_i k l z^(k+l-2) / n^2.
        std::array<double, 7> pw{};
        for (double v : z) {
            double p = 1.0;
            for (auto& s : pw) {
                s += p;
                p *= v;
            }
        }
        std::array<std::array<double, 4>, 4> gram{};
        const double n2 = static_cast<double>(n) * static_cast<double>(n);
        for (int k = 0; k < 4; ++k)
            for (int l = 0; l < 4; ++l) gram[k][l] = (k + 1.0) * (l + 1.0) * pw[k + l] / n2;
        std::array<double, 4> lambda = g;
        solve4(gram, lambda);

        double step = 1.0;
        const double before = norm2(g);
        bool improved = false;
        for (int half = 0; half < 30; ++half, step *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) {
                const double v = z[i];
                const double d = (lambda[0] + 2.0 * lambda[1] * v + 3.0 * lambda[2] * v * v + 4.0 * lambda[3] * v * v * v) /
                                 static_cast<double>(n);
                trial[i] = v - step * d;
            }
            auto gt = standard_moment_residual(trial, skew, kurt);
            if (norm2(gt) < before) {
                z.swap(trial);
                g = gt;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }

    // Rank-preserving reassignment: the i-th smallest new value goes to the
    // position holding the i-th smallest old value.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::sort(z.begin(), z.end());
    const double tsd = std::sqrt(t.variance);
    for (std::size_t r = 0; r < n; ++r) values[order[r]] = t.mean + tsd * z[r];
}

inline Plane plane_from(const std::vector<double>& v, int w, int h) {
    Plane p;
    p.w = w;
    p.h = h;
    p.v = v;
    p.m.assign(v.size(), 1);
    return p;
}

}  // namespace texture_detail

// Statistics of the masked pixels of `patch`, computed over the mask's
// bounding rectangle. Moments use masked pixels only; the autocorrelation
// counts only lag pairs with both ends inside the mask.
inline TextureStats compute_stats(const RasterImage& patch, const RegionMask& mask, int levels, int radius) {
    using namespace texture_detail;
    if (!mask.matches(patch)) throw ValidationError("compute_stats: mask dimensions differ from patch");
    if (levels < 0 || radius < 0) throw ParameterError("levels and lag radius must be non-negative");
    const auto rect = bounding_rect(mask);
    if (!rect) throw RegionTooSmallError("compute_stats: empty mask");
    if (levels > 0 && (rect->width() < (1 << levels) || rect->height() < (1 << levels)))
        throw ParameterError("patch " + std::to_string(rect->width()) + "x" + std::to_string(rect->height()) +
                             " is too small for " + std::to_string(levels) + " pyramid levels");

    TextureStats stats;
    stats.levels = levels;
    stats.radius = radius;
    for (int c = 0; c < patch.channels(); ++c) {
        Plane base;
        base.w = rect->width();
        base.h = rect->height();
        base.v.resize(static_cast<std::size_t>(base.w) * base.h);
        base.m.resize(base.v.size());
        std::uint64_t sum = 0;
        std::size_t n = 0;
        ChannelStats cs;
        cs.min = 255.0;
        cs.max = 0.0;
        for (int y = 0; y < base.h; ++y)
            for (int x = 0; x < base.w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * base.w + x;
                const bool in = mask.at(rect->x0 + x, rect->y0 + y);
                const std::uint8_t v = patch.at(rect->x0 + x, rect->y0 + y, c);
                base.v[i] = v;
                base.m[i] = in;
                if (in) {
                    sum += v;
                    ++n;
                    cs.min = std::min<double>(cs.min, v);
                    cs.max = std::max<double>(cs.max, v);
                }
            }
        cs.mean = static_cast<double>(sum) / static_cast<double>(n);
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (std::size_t i = 0; i < base.v.size(); ++i)
            if (base.m[i]) {
                const double d = base.v[i] - cs.mean;
                const double d2 = d * d;
                m2 += d2;
                m3 += d2 * d;
                m4 += d2 * d2;
            }
        const auto nn = static_cast<double>(n);
        m2 /= nn;
        m3 /= nn;
        m4 /= nn;
        cs.variance = m2;
        if (m2 > 0.0) {
            cs.skewness = m3 / std::pow(m2, 1.5);
            cs.kurtosis = m4 / (m2 * m2);
        }
        Plane level = base;
        for (int l = 0; l < levels; ++l) {
            if (l > 0) level = downsample(level);
            cs.autocorr.push_back(autocorrelation(level, radius));
        }
        stats.channels.push_back(std::move(cs));
    }
    return stats;
}

inline TextureStats compute_stats(const RasterImage& patch, int levels, int radius) {
    return compute_stats(patch, RegionMask(patch.width(), patch.height(), true), levels, radius);
}

// Marginal moment vector [mean, variance, skewness, kurtosis] of one channel.
inline std::array<double, 4> moment_vector(const ChannelStats& c) {
    return {c.mean, c.variance, c.skewness, c.kurtosis};
}

inline RasterImage synthesize(const TextureStats& stats, int width, int height, int iterations, std::uint64_t seed) {
    using namespace texture_detail;
    if (iterations < 1) throw ParameterError("synthesis needs at least one iteration");
    if (width < 1 || height < 1) throw ParameterError("synthesis dimensions must be positive");
    const int channels = static_cast<int>(stats.channels.size());
    if (channels != 1 && channels != 3) throw ParameterError("texture stats must have 1 or 3 channels");

    RasterImage out(width, height, channels);
    Rng rng(seed);
    const std::size_t n = static_cast<std::size_t>(width) * height;
    for (int c = 0; c < channels; ++c) {
        const auto& t = stats.channels[c];
        std::vector<double> canvas(n);
        for (auto& v : canvas) v = t.mean + std::sqrt(t.variance) * rng.normal();

        if (t.variance > 0.0) {
            for (int round = 0; round < iterations; ++round) {
                for (int l = static_cast<int>(t.autocorr.size()) - 1; l >= 0; --l) {
                    const int f = 1 << l;
                    const int lw = width / f, lh = height / f;
                    if (lw < 2 || lh < 2) continue;
                    Plane level = plane_from(canvas, width, height);
                    for (int k = 0; k < l; ++k) level = downsample(level);
                    const auto adjusted = match_autocorr(level, t.autocorr[l], stats.radius);
                    for (int y = 0; y < lh * f; ++y)
                        for (int x = 0; x < lw * f; ++x) {
                            const std::size_t li = static_cast<std::size_t>(y / f) * lw + x / f;
                            canvas[static_cast<std::size_t>(y) * width + x] += adjusted[li] - level.v[li];
                        }
                }
                match_moments(canvas, t);
                for (auto& v : canvas) v = std::clamp(v, t.min, t.max);
            }
        } else {
            std::fill(canvas.begin(), canvas.end(), t.mean);
        }
        for (std::size_t i = 0; i < n; ++i) out.data()[i * channels + c] = to_u8(canvas[i]);
    }
    return out;
}

// Texture perturbation of the component selected by `mask`:
//   x = 0: the component is removed (filled), the rest is intact
//   x = 1: the component is replaced by synthesized texture, the rest is removed
//   x = 2: the component is replaced by synthesized texture, the rest is intact
inline RasterImage texture_region(const RasterImage& image, const RegionMask& mask, int x, std::uint64_t seed,
                                  const TextureOptions& opt = {}) {
    check_level(Family::Texture, x);
    if (!mask.matches(image)) throw ValidationError("texture: mask dimensions differ from image");
    if (mask.count() < 4) throw RegionTooSmallError("texture: selected region has fewer than 4 pixels");
    if (x == 0) return apply_fill(image, mask.complement(), opt.fill);

    const auto rect = *bounding_rect(mask);
    int levels = opt.levels;
    while (levels > 0 && (rect.width() < (1 << levels) || rect.height() < (1 << levels))) --levels;
    const auto stats = compute_stats(image, mask, levels, opt.radius);
    const auto tex = synthesize(stats, rect.width(), rect.height(), opt.iterations, seed);

    RasterImage base = x == 1 ? apply_fill(image, RegionMask(image.width(), image.height(), false), opt.fill) : image;
    RasterImage placed = base;
    for (int y = rect.y0; y < rect.y1; ++y)
        for (int xx = rect.x0; xx < rect.x1; ++xx)
            for (int c = 0; c < image.channels(); ++c) placed.at(xx, y, c) = tex.at(xx - rect.x0, y - rect.y0, c);
    return composite(base, placed, mask);
}

}  // namespace cprobe

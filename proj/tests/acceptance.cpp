// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cprobe/attribution.hpp"
#include "cprobe/hashtag.hpp"
#include "cprobe/pipeline.hpp"
#include "cprobe/probe.hpp"
#include "cprobe/retrieval.hpp"
#include "cprobe/synthetic.hpp"
#include "cprobe/texsynth.hpp"
#include "cprobe/transform.hpp"

using namespace cprobe;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string detail;
    void require(bool cond, const std::string& what) {
        if (!cond && ok) detail = what;
        ok = ok && cond;
    }
};

RasterImage noise_image(int w, int h, int c, Rng& r) {
    RasterImage img(w, h, c);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(r.below(256));
    return img;
}

std::vector<BBox> random_boxes(int w, int h, Rng& r) {
    std::vector<BBox> boxes;
    const int n = 1 + static_cast<int>(r.below(3));
    for (int i = 0; i < n; ++i) {
        const int bw = 4 + static_cast<int>(r.below(w / 2)), bh = 4 + static_cast<int>(r.below(h / 2));
        boxes.push_back({static_cast<int>(r.below(w - bw + 1)), static_cast<int>(r.below(h - bh + 1)), bw, bh});
    }
    return boxes;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- 1 ---------------------------------------------------------------------
Check schedule() {
    Check c;
    c.require(amount_margin(0) == 0, "amount x=0");
    for (int x = 1; x <= 7; ++x) c.require(amount_margin(x) == (1 << x), "amount x=" + std::to_string(x));
    c.require(!amount_margin(8).has_value(), "amount x=8 keeps the full image");
    for (int x = 0; x <= 5; ++x) {
        c.require(jigsaw_tiles(x) == 1 << (5 - x), "jigsaw x=" + std::to_string(x));
        c.require(blur_sigma(x) == static_cast<double>(1 << (5 - x)), "blur x=" + std::to_string(x));
    }
    const std::pair<Family, int> limits[] = {{Family::Amount, 8}, {Family::Jigsaw, 5}, {Family::Blur, 5}, {Family::Texture, 2}};
    for (auto [f, hi] : limits) {
        for (int bad : {-1, hi + 1}) {
            bool threw = false;
            try {
                check_level(f, bad);
            } catch (const ParameterError&) {
                threw = true;
            }
            c.require(threw, "level " + std::to_string(bad) + " accepted for " + std::string(to_string(f)));
        }
    }
    return c;
}

// --- 2 ---------------------------------------------------------------------
Check jigsaw_identity_conservation() {
    Check c;
    Rng r(2024);
    for (int i = 0; i < 50; ++i) {
        const int w = 32 + static_cast<int>(r.below(64)), h = 32 + static_cast<int>(r.below(64));
        const auto img = noise_image(w, h, 3, r);
        const auto boxes = random_boxes(w, h, r);
        for (auto t : {Target::Object, Target::Context}) {
            const PerturbationSpec spec{t, Family::Jigsaw, 5, r.next(), Fill::Gray128};
            c.require(apply_perturbation(img, boxes, spec) == img, "x=5 changed image " + std::to_string(i));
        }
    }
    for (int g : {2, 4, 8, 16, 32})
        for (int trial = 0; trial < 10; ++trial) {
            const int w = 32 * (2 + static_cast<int>(r.below(2))), h = 32 * (2 + static_cast<int>(r.below(2)));
            const auto img = noise_image(w, h, 3, r);
            const auto boxes = random_boxes(w, h, r);
            const auto mask = region_mask(boxes, trial % 2 ? Target::Context : Target::Object, 0, w, h);
            const std::uint64_t seed = r.next();
            const auto out = jigsaw(img, mask, g, seed);
            const auto plan = plan_jigsaw(mask, g, seed);
            RegionMask touched(w, h, false);
            std::vector<std::uint8_t> before, after;
            for (auto cell : plan.selected) {
                const auto& rc = plan.cells[cell];
                for (int y = rc.y0; y < rc.y1; ++y)
                    for (int x = rc.x0; x < rc.x1; ++x) {
                        touched.set(x, y, true);
                        for (int k = 0; k < 3; ++k) {
                            before.push_back(img.at(x, y, k));
                            after.push_back(out.at(x, y, k));
                        }
                    }
            }
            std::sort(before.begin(), before.end());
            std::sort(after.begin(), after.end());
            c.require(before == after, "pixel multiset changed at g=" + std::to_string(g));
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (!touched.at(x, y))
                        for (int k = 0; k < 3; ++k)
                            c.require(out.at(x, y, k) == img.at(x, y, k), "untouched pixel changed at g=" + std::to_string(g));
        }
    return c;
}

// --- 3 ---------------------------------------------------------------------
Check blur_dc_monotone() {
    Check c;
    for (int v : {0, 1, 77, 128, 200, 255}) {
        const RasterImage flat(48, 40, 3, static_cast<std::uint8_t>(v));
        for (int x = 0; x <= 5; ++x) {
            const auto out = gaussian_blur(flat, blur_sigma(x));
            for (auto p : out.data())
                c.require(std::abs(int(p) - v) <= 1, "constant " + std::to_string(v) + " moved at x=" + std::to_string(x));
        }
    }
    Rng r(7);
    // Several sigma = 32 kernel diameters wide, so replicated borders stay a minor share of the frame.
    const auto noise = noise_image(1024, 1024, 1, r);
    const auto variance = [](const RasterImage& img) {
        double m = 0, s = 0;
        for (auto p : img.data()) m += p;
        m /= double(img.data().size());
        for (auto p : img.data()) s += (p - m) * (p - m);
        return s / double(img.data().size());
    };
    double prev = variance(noise);
    for (int x = 5; x >= 0; --x) {
        const PerturbationSpec spec{Target::Context, Family::Blur, x, 0, Fill::Gray128};
        const double v = variance(apply_perturbation(noise, {}, spec));
        c.require(v <= prev, "variance rose at x=" + std::to_string(x) + ": " + fmt(v) + " > " + fmt(prev));
        prev = v;
    }
    return c;
}

// --- 4 ---------------------------------------------------------------------
RasterImage skewed_texture(int w, int h, Rng& r) {
    RasterImage img(w, h, 3);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> g(static_cast<std::size_t>(w) * h);
        for (auto& v : g) v = r.normal();
        const int rad = 1 + static_cast<int>(r.below(3));
        const double a = 0.2 + 0.6 * r.uniform(), sd = 12 + 25 * r.uniform(), mu = 60 + 100 * r.uniform();
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0;
                for (int dy = -rad; dy <= rad; ++dy)
                    for (int dx = -rad; dx <= rad; ++dx) s += g[((y + dy + h) % h) * w + (x + dx + w) % w];
                s /= (2 * rad + 1);
                img.at(x, y, c) = to_u8(mu + sd * (std::exp(a * s) - 1) / a);
            }
    }
    return img;
}

Check texture_statistics() {
    Check c;
    Rng r(99);
    int patches = 0;
    double worst_mean = 0, worst_var = 0, worst_skew = 0, worst_kurt = 0;
    while (patches < 20) {
        const auto patch = skewed_texture(64, 64, r);
        const auto target = compute_stats(patch, 3, 3);
        bool rich = true;
        for (const auto& ch : target.channels) rich = rich && ch.variance >= 25.0;
        if (!rich) continue;
        ++patches;
        const auto out = synthesize(target, 64, 64, 10, r.next());
        const auto got = compute_stats(out, 3, 3);
        for (int k = 0; k < 3; ++k) {
            const auto& t = target.channels[k];
            const auto& o = got.channels[k];
            worst_mean = std::max(worst_mean, std::abs(o.mean - t.mean) / 255.0);
            worst_var = std::max(worst_var, std::abs(o.variance - t.variance) / t.variance);
            worst_skew = std::max(worst_skew, std::abs(o.skewness - t.skewness) / std::abs(t.skewness));
            worst_kurt = std::max(worst_kurt, std::abs(o.kurtosis - t.kurtosis) / t.kurtosis);
        }
    }
    c.require(worst_mean <= 0.02, "mean error " + fmt(worst_mean));
    c.require(worst_var <= 0.05, "variance error " + fmt(worst_var));
    c.require(worst_skew <= 0.10, "skewness error " + fmt(worst_skew));
    c.require(worst_kurt <= 0.10, "kurtosis error " + fmt(worst_kurt));
    if (c.ok)
        c.detail = "worst mean " + fmt(worst_mean) + ", var " + fmt(worst_var) + ", skew " + fmt(worst_skew) +
                   ", kurt " + fmt(worst_kurt);
    return c;
}

// --- 5 ---------------------------------------------------------------------
Check attribution_ratio() {
    Check c;
    RegionMask a(4, 2, false), b(4, 2, false), full(4, 2, true);
    a.set(0, 0, true);
    a.set(1, 0, true);
    b.set(2, 1, true);
    c.require(correlation(a, a) == 1.0, "identical masks");
    c.require(correlation(b, a) == 0.0, "disjoint masks");
    c.require(correlation(a, full) == 0.25, "2/8 ratio");
    c.require(!correlation(a, RegionMask(4, 2, false)).has_value(), "empty pano mask must be undefined");

    // Random corpus against a direct recomputation of per-image ratios.
    Rng r(31);
    const std::vector<std::string> intents{"m0", "m1", "m2"}, panos{"p0", "p1", "p2", "p3"};
    std::vector<AttributionSample> samples;
    std::map<std::pair<std::string, std::string>, std::vector<double>> expect;
    const AttributionConfig cfg{};
    for (int i = 0; i < 30; ++i) {
        AttributionSample s;
        s.image_id = "img" + std::to_string(i);
        const int w = 8 + static_cast<int>(r.below(8)), h = 8 + static_cast<int>(r.below(8));
        const auto rand_map = [&] {
            std::vector<float> v(static_cast<std::size_t>(w) * h);
            for (auto& x : v) x = static_cast<float>(r.uniform());
            return HeatMap(w, h, v);
        };
        for (const auto& m : intents)
            if (r.below(2)) s.intent_labels.push_back(m);
        for (const auto& m : intents) s.cams.emplace(m, rand_map());
        for (const auto& p : panos)
            if (r.below(4)) s.panos.emplace(p, rand_map());
        for (const auto& m : s.intent_labels) {
            const auto& cam = s.cams.at(m).values();
            const float peak = *std::max_element(cam.begin(), cam.end());
            for (const auto& [p, pm] : s.panos) {
                std::size_t inter = 0, total = 0;
                for (std::size_t k = 0; k < cam.size(); ++k)
                    if (pm.values()[k] >= cfg.tau_p) {
                        ++total;
                        inter += cam[k] >= cfg.tau_cam * peak;
                    }
                if (total) expect[{p, m}].push_back(double(inter) / double(total));
            }
        }
        samples.push_back(std::move(s));
    }
    const auto mx = correlation_matrix(samples, cfg).matrix;
    for (const auto& p : mx.pano_classes)
        for (const auto& m : mx.intent_classes) {
            const auto got = mx.lookup(p, m);
            auto it = expect.find({p, m});
            if (it == expect.end()) {
                c.require(!got.has_value(), "cell " + p + "/" + m + " should be absent");
                continue;
            }
            double mean = 0;
            for (double v : it->second) mean += v;
            mean /= double(it->second.size());
            c.require(got.has_value() && std::abs(*got - mean) <= 1e-12, "cell " + p + "/" + m + " mean");
            c.require(got && *got >= 0.0 && *got <= 1.0, "cell " + p + "/" + m + " outside [0, 1]");
        }
    return c;
}

// --- 6 ---------------------------------------------------------------------
void enumerate_covers(const std::string& s, std::size_t pos, const std::vector<std::string>& words, std::size_t used,
                      std::size_t& best) {
    if (used >= best) return;
    if (pos == s.size()) {
        best = used;
        return;
    }
    for (const auto& w : words)
        if (s.compare(pos, w.size(), w) == 0) enumerate_covers(s, pos + w.size(), words, used + 1, best);
}

Check word_break_minimal() {
    Check c;
    const Dictionary coffee{"coffee", "me", "cof", "fee", "coffeeme"};
    const Dictionary plain{"coffee", "me"};
    c.require(word_break("coffeeme", plain) == std::vector<std::string>{"coffee", "me"}, "coffeeme");
    c.require(word_break("#CoffeeMe", plain) == std::vector<std::string>{"coffee", "me"}, "#CoffeeMe");
    c.require(word_break("coffeeme", coffee) == std::vector<std::string>{"coffeeme"}, "single-token cover preferred");
    c.require(!word_break("coffeex", plain).has_value(), "unsegmentable accepted");

    Rng r(6);
    std::vector<std::string> words;
    while (words.size() < 50) {
        std::string w(1 + r.below(4), 'a');
        for (auto& ch : w) ch = static_cast<char>('a' + r.below(5));
        if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
    }
    const Dictionary dict(words);
    int rejected = 0;
    for (int i = 0; i < 500; ++i) {
        std::string s;
        const std::size_t len = 1 + r.below(20);
        if (i % 2) {
            while (s.size() < len) s += words[r.below(words.size())];
            s.resize(std::min<std::size_t>(s.size(), 20));
        } else {
            for (std::size_t k = 0; k < len; ++k) s += static_cast<char>('a' + r.below(6));
        }
        std::size_t best = static_cast<std::size_t>(-1);
        enumerate_covers(s, 0, words, 0, best);
        const auto got = word_break(s, dict);
        if (best == static_cast<std::size_t>(-1)) {
            ++rejected;
            c.require(!got.has_value(), "'" + s + "' has no cover but was segmented");
            continue;
        }
        c.require(got.has_value(), "'" + s + "' rejected despite a cover");
        if (!got) continue;
        c.require(got->size() == best, "'" + s + "' not minimal");
        std::string joined;
        for (const auto& t : *got) {
            c.require(dict.contains(t), "'" + t + "' not in dictionary");
            joined += t;
        }
        c.require(joined == s, "'" + s + "' cover does not spell the input");
    }
    c.require(rejected > 0, "no unsegmentable inputs were exercised");
    return c;
}

// --- 7 ---------------------------------------------------------------------
Check knn_exact() {
    Check c;
    Rng r(1234);
    const auto vec = [&] {
        std::vector<float> v(128);
        for (auto& x : v) x = static_cast<float>(r.normal());
        return v;
    };
    std::vector<IndexItem> items;
    std::vector<std::vector<float>> raw;
    for (int i = 0; i < 1000; ++i) {
        raw.push_back(vec());
        items.push_back({"v" + std::to_string(i), raw.back()});
    }
    const auto index = build_index(items);
    for (int q = 0; q < 100; ++q) {
        const auto query = vec();
        std::vector<std::pair<double, int>> sims;
        for (int i = 0; i < 1000; ++i) {
            double dot = 0, nv = 0, nq = 0;
            for (int d = 0; d < 128; ++d) {
                dot += double(raw[i][d]) * query[d];
                nv += double(raw[i][d]) * raw[i][d];
                nq += double(query[d]) * query[d];
            }
            sims.emplace_back(-dot / std::sqrt(nv * nq), i);
        }
        std::sort(sims.begin(), sims.end());
        const auto hits = knn_query(index, query, 10);
        c.require(hits.size() == 10, "wrong result count");
        for (std::size_t k = 0; k < hits.size(); ++k)
            c.require(hits[k].id == "v" + std::to_string(sims[k].second),
                      "query " + std::to_string(q) + " rank " + std::to_string(k));
    }
    return c;
}

// --- 8 ---------------------------------------------------------------------
Check gradient_check() {
    Check c;
    Rng r(88);
    double worst = 0, worst_shift = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t m = 2 + r.below(8), d = 1 + r.below(10);
        std::vector<double> x(d), t(m);
        for (auto& v : x) v = r.normal();
        double s = 0;
        for (auto& v : t) s += (v = r.uniform());
        for (auto& v : t) v /= s;
        ProbeModel model{m, d, Matrix(m, d + 1)};
        for (auto& w : model.weights.data) w = r.normal();
        const auto g = loss_grad(model.logits(x), t, x);
        for (std::size_t i = 0; i < model.weights.data.size(); ++i) {
            const double w0 = model.weights.data[i], h = 1e-5;
            model.weights.data[i] = w0 + h;
            const double up = soft_ce_loss(model.logits(x), t);
            model.weights.data[i] = w0 - h;
            const double down = soft_ce_loss(model.logits(x), t);
            model.weights.data[i] = w0;
            const double fd = (up - down) / (2 * h);
            const double rel = std::abs(fd - g.data[i]) / std::max({std::abs(fd), std::abs(g.data[i]), 1e-8});
            worst = std::max(worst, rel);
        }
        auto z = model.logits(x);
        const auto p = softmax(z);
        const double shift = 50 * r.normal();
        for (auto& v : z) v += shift;
        const auto q = softmax(z);
        for (std::size_t k = 0; k < m; ++k) worst_shift = std::max(worst_shift, std::abs(p[k] - q[k]));
    }
    c.require(worst <= 1e-4, "gradient relative error " + fmt(worst));
    c.require(worst_shift <= 1e-9, "softmax shift error " + fmt(worst_shift));
    if (c.ok) c.detail = "worst relative error " + fmt(worst) + ", shift " + fmt(worst_shift);
    return c;
}

// --- 9 ---------------------------------------------------------------------
Check loss_anchors() {
    Check c;
    Rng r(9);
    for (std::size_t m = 2; m <= 30; ++m) {
        const std::vector<double> z(m, r.normal()), t(m, 1.0 / double(m));
        c.require(std::abs(soft_ce_loss(z, t) - std::log(double(m))) <= 1e-9, "uniform M=" + std::to_string(m));
        std::vector<double> logits(m), onehot(m, 0.0);
        for (auto& v : logits) v = 3 * r.normal();
        const std::size_t k = r.below(m);
        onehot[k] = 1;
        double lse = 0;
        for (double v : logits) lse += std::exp(v);
        c.require(std::abs(soft_ce_loss(logits, onehot) - (std::log(lse) - logits[k])) <= 1e-12,
                  "one-hot M=" + std::to_string(m));
    }
    return c;
}

// --- 10 / 11 ---------------------------------------------------------------
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
        std::vector<double> rk(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            for (std::size_t k = i; k <= j; ++k) rk[idx[k]] = (double(i) + double(j)) / 2.0 + 1.0;
            i = j + 1;
        }
        return rk;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / double(ra.size());
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / double(rb.size());
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

struct TrendRun {
    fs::path root;
    PipelineConfig cfg;
};

TrendRun trend_setup() {
    TrendRun t;
    t.root = fs::temp_directory_path() / "cprobe_acceptance";
    fs::remove_all(t.root);
    generate_synthetic(t.root / "data", SyntheticConfig{});
    t.cfg.manifest = t.root / "data" / "manifest.jsonl";
    t.cfg.out = t.root / "run1";
    t.cfg.seed = 1;
    return t;
}

Check trend(const TrendRun& t) {
    Check c;
    const auto outcome = run_pipeline(t.cfg);
    c.require(outcome.status == 0, "pipeline failed: " + outcome.message);
    if (!c.ok) return c;
    std::vector<double> xs, obj, ctx;
    for (const auto& r : outcome.results) {
        c.require(r.aggregate.runs == 5, "expected 5 probe runs per level");
        if (r.target == Target::Object) {
            xs.push_back(r.level);
            obj.push_back(r.aggregate.macro.mean);
        } else {
            ctx.push_back(r.aggregate.macro.mean);
        }
    }
    c.require(obj.size() == 9 && ctx.size() == 9, "expected 9 levels per target");
    if (!c.ok) return c;
    const double rho = spearman(xs, obj), diff = ctx[8] - ctx[0];
    c.require(rho >= 0.9, "object-amount Spearman rho " + fmt(rho));
    c.require(diff >= 0.2, "context F1(x=8) - F1(x=0) = " + fmt(diff));
    if (c.ok) c.detail = "rho " + fmt(rho) + ", context gain " + fmt(diff);
    return c;
}

Check determinism(const TrendRun& t) {
    Check c;
    auto cfg = t.cfg;
    cfg.out = t.root / "run2";
    const auto outcome = run_pipeline(cfg);
    c.require(outcome.status == 0, "rerun failed: " + outcome.message);
    for (const char* f : {"results.csv", "baseline.csv", "fig_amount.svg"}) {
        const auto a = t.cfg.out / f, b = cfg.out / f;
        c.require(fs::exists(a) && fs::exists(b), std::string(f) + " missing");
        c.require(slurp(a) == slurp(b), std::string(f) + " differs");
    }
    return c;
}

// --- 12 --------------------------------------------------------------------
Check random_guess() {
    Check c;
    Matrix truth(1000, 2);
    for (std::size_t i = 0; i < truth.rows; ++i) truth(i, i % 2) = 1.0;
    const std::vector<double> prior{0.5, 0.5};
    const auto res = random_guess_f1(prior, truth, 1000, 12);
    c.require(std::abs(res.mean - 0.5) <= 0.02, "mean macro F1 " + fmt(res.mean));
    if (c.ok) c.detail = "mean " + fmt(res.mean) + " +- " + fmt(res.std);
    return c;
}

}  // namespace

int main() {
    int failures = 0;
    const auto run = [&](int n, const char* name, double limit_s, const std::function<Check()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Check c;
        try {
            c = fn();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > limit_s) c.require(false, "took " + fmt(secs) + " s, limit " + fmt(limit_s) + " s");
        if (!c.ok) ++failures;
        std::printf("[%s] %d. %s (%.2f s)%s%s\n", c.ok ? "PASS" : "FAIL", n, name, secs, c.detail.empty() ? "" : ": ",
                    c.detail.c_str());
        std::fflush(stdout);
    };

    run(1, "Schedule fidelity", 1, schedule);
    run(2, "Jigsaw identity and conservation", 30, jigsaw_identity_conservation);
    run(3, "Blur DC and monotonicity", 30, blur_dc_monotone);
    run(4, "Texture-statistics matching", 120, texture_statistics);
    run(5, "Correlation ratio correctness", 5, attribution_ratio);
    run(6, "Word-break minimality", 30, word_break_minimal);
    run(7, "KNN exactness", 10, knn_exact);
    run(8, "Gradient check", 5, gradient_check);
    run(9, "Loss anchors", 1, loss_anchors);
    TrendRun trend_run;
    run(10, "Trend reproduction", 600, [&] {
        trend_run = trend_setup();
        return trend(trend_run);
    });
    run(11, "Determinism", 600, [&] { return determinism(trend_run); });
    run(12, "Random-guess sanity", 5, random_guess);
    return failures ? 1 : 0;
}

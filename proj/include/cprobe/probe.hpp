#pragma once

// Soft-target softmax cross-entropy, a linear probe trained by mini-batch
// gradient descent, and the evaluation protocol around it: macro F1,
// random-guess baseline, and multi-run aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cprobe/error.hpp"
#include "cprobe/rng.hpp"
#include "cprobe/tensor.hpp"

namespace cprobe {

// Row-major dense matrix of doubles.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double v = 0.0) : rows(r), cols(c), data(r * c, v) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return std::span<const double>(data).subspan(r * cols, cols); }
    std::span<double> row(std::size_t r) { return std::span<double>(data).subspan(r * cols, cols); }

    static Matrix from_tensor(const Tensor& t) {
        if (t.rank() != 2) throw ValidationError("expected a rank-2 tensor");
        Matrix m(t.dim(0), t.dim(1));
        std::copy(t.data().begin(), t.data().end(), m.data.begin());
        return m;
    }
};

struct LabelDistribution {
    std::vector<int> counts;
    std::vector<double> target;  // counts / sum(counts)
    std::size_t classes() const noexcept { return target.size(); }
};

// Divides by the sum of counts (not annotator_total) so the target is always
// a distribution, even when multi-label votes make the two differ.
inline LabelDistribution normalize_target(std::span<const int> counts, int annotator_total) {
    long long sum = 0;
    for (int c : counts) {
        if (c < 0) throw ValidationError("label counts must be non-negative");
        sum += c;
    }
    if (sum == 0) throw ValidationError("label counts are all zero");
    if (annotator_total < *std::max_element(counts.begin(), counts.end()))
        throw ValidationError("annotator_total is below the largest label count");
    LabelDistribution d;
    d.counts.assign(counts.begin(), counts.end());
    d.target.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        d.target[i] = static_cast<double>(counts[i]) / static_cast<double>(sum);
    return d;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - peak));
    for (auto& v : p) v /= z;
    return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - peak);
    const double lz = std::log(z);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - peak - lz;
    return out;
}

// -sum_m target_m * log softmax(logits)_m
inline double soft_ce_loss(std::span<const double> logits, std::span<const double> target) {
    if (logits.size() != target.size()) throw ValidationError("logits and target sizes differ");
    const auto lp = log_softmax(logits);
    double loss = 0.0;
    for (std::size_t i = 0; i < lp.size(); ++i)
        if (target[i] != 0.0) loss -= target[i] * lp[i];
    return loss;
}

inline double soft_ce_loss(std::span<const double> logits, const LabelDistribution& t) {
    return soft_ce_loss(logits, t.target);
}

// Gradient of soft_ce_loss w.r.t. an M x (D+1) weight matrix whose last
// column is the bias: (p - target) outer [features, 1].
inline Matrix loss_grad(std::span<const double> logits, std::span<const double> target,
                        std::span<const double> features) {
    const auto p = softmax(logits);
    Matrix g(logits.size(), features.size() + 1);
    for (std::size_t m = 0; m < logits.size(); ++m) {
        const double d = p[m] - target[m];
        for (std::size_t j = 0; j < features.size(); ++j) g(m, j) = d * features[j];
        g(m, features.size()) = d;
    }
    return g;
}

struct ProbeModel {
    std::size_t classes = 0;
    std::size_t features = 0;
    Matrix weights;  // classes x (features + 1)

    std::vector<double> logits(std::span<const double> x) const {
        std::vector<double> out(classes);
        for (std::size_t m = 0; m < classes; ++m) {
            const auto w = weights.row(m);
            double s = w[features];
            for (std::size_t j = 0; j < features; ++j) s += w[j] * x[j];
            out[m] = s;
        }
        return out;
    }

    Tensor to_tensor() const {
        std::vector<float> v(weights.data.begin(), weights.data.end());
        return Tensor({classes, features + 1}, std::move(v));
    }
    static ProbeModel from_tensor(const Tensor& t) {
        if (t.rank() != 2 || t.dim(1) < 1) throw ValidationError("model tensor must be M x (D+1)");
        ProbeModel m;
        m.classes = t.dim(0);
        m.features = t.dim(1) - 1;
        m.weights = Matrix::from_tensor(t);
        return m;
    }
};

struct TrainConfig {
    double lr = 0.1;
    std::size_t epochs = 50;
    std::size_t batch = 32;
    std::uint64_t seed = 0;
    double l2 = 1e-4;          // applied to weights, not biases
    double init_scale = 0.01;  // std of the seeded Gaussian weight init
};

struct TrainResult {
    ProbeModel model;
    std::vector<double> epoch_loss;  // mean data loss after each epoch
    double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

inline double mean_loss(const ProbeModel& model, const Matrix& x, std::span<const LabelDistribution> targets) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) s += soft_ce_loss(model.logits(x.row(i)), targets[i]);
    return s / static_cast<double>(x.rows);
}

inline ProbeModel init_probe(std::size_t classes, std::size_t features, const TrainConfig& cfg) {
    ProbeModel model{classes, features, Matrix(classes, features + 1)};
    Rng rng(cfg.seed);
    for (std::size_t m = 0; m < classes; ++m)
        for (std::size_t j = 0; j < features; ++j) model.weights(m, j) = cfg.init_scale * rng.normal();
    return model;
}

// Mini-batch gradient descent on the mean soft cross-entropy plus
// 0.5 * l2 * |W|^2. Initialization and per-epoch shuffling both derive from
// cfg.seed, so a config reproduces its weights bit for bit.
inline TrainResult train_probe(const Matrix& x, std::span<const LabelDistribution> targets, const TrainConfig& cfg) {
    const std::size_t n = x.rows, d = x.cols;
    if (n == 0) throw ValidationError("no training examples");
    if (targets.size() != n) throw ValidationError("feature and target counts differ");
    const std::size_t classes = targets[0].classes();
    for (const auto& t : targets)
        if (t.classes() != classes) throw ValidationError("targets have inconsistent class counts");
    if (cfg.batch == 0) throw ParameterError("batch size must be positive");

    TrainResult res;
    res.model = init_probe(classes, d, cfg);
    auto& w = res.model.weights;
    Rng rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Matrix grad(classes, d + 1);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t end = std::min(n, start + cfg.batch);
            std::fill(grad.data.begin(), grad.data.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const auto xi = x.row(order[b]);
                const auto p = softmax(res.model.logits(xi));
                const auto& t = targets[order[b]].target;
                for (std::size_t m = 0; m < classes; ++m) {
                    const double g = p[m] - t[m];
                    auto gr = grad.row(m);
                    for (std::size_t j = 0; j < d; ++j) gr[j] += g * xi[j];
                    gr[d] += g;
                }
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t m = 0; m < classes; ++m)
                for (std::size_t j = 0; j <= d; ++j) {
                    double g = grad(m, j) * scale;
                    if (j < d) g += cfg.l2 * w(m, j);
                    w(m, j) -= cfg.lr * g;
                }
        }
        const double loss = mean_loss(res.model, x, targets);
        if (!std::isfinite(loss)) throw DivergenceError(epoch, "training loss is not finite");
        res.epoch_loss.push_back(loss);
    }
    return res;
}

inline Matrix predict_proba(const ProbeModel& model, const Matrix& x) {
    if (x.cols != model.features)
        throw ValidationError("features have " + std::to_string(x.cols) + " columns, model expects " +
                              std::to_string(model.features));
    Matrix p(x.rows, model.classes);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto pi = softmax(model.logits(x.row(i)));
        std::copy(pi.begin(), pi.end(), p.row(i).begin());
    }
    return p;
}

struct RunSummary {
    std::vector<double> per_class_f1;
    double macro_f1 = 0.0;
    std::uint64_t seed = 0;
    // Classes with no true and no predicted positives; their F1 is 0 by convention.
    std::vector<std::size_t> undefined_classes;
};

// Per-class F1 from binary predictions; 0/0 counts as 0 and is flagged.
inline RunSummary macro_f1_binary(const Matrix& predicted, const Matrix& truths) {
    if (predicted.rows != truths.rows || predicted.cols != truths.cols)
        throw ValidationError("prediction and truth shapes differ");
    RunSummary s;
    const std::size_t m = truths.cols;
    s.per_class_f1.assign(m, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truths.rows; ++i) {
            const bool p = predicted(i, c) != 0.0, t = truths(i, c) != 0.0;
            tp += p && t;
            fp += p && !t;
            fn += !p && t;
        }
        const std::size_t denom = 2 * tp + fp + fn;
        if (denom == 0) {
            s.undefined_classes.push_back(c);
            continue;
        }
        s.per_class_f1[c] = 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    s.macro_f1 = m ? std::accumulate(s.per_class_f1.begin(), s.per_class_f1.end(), 0.0) / static_cast<double>(m) : 0.0;
    return s;
}

// Class m is predicted iff its probability is >= tau_pred (default 1/M).
inline RunSummary macro_f1(const Matrix& probabilities, const Matrix& truths, std::optional<double> tau_pred = {}) {
    const double tau = tau_pred.value_or(1.0 / static_cast<double>(probabilities.cols));
    Matrix predicted(probabilities.rows, probabilities.cols);
    for (std::size_t i = 0; i < probabilities.data.size(); ++i) predicted.data[i] = probabilities.data[i] >= tau ? 1.0 : 0.0;
    return macro_f1_binary(predicted, truths);
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
};

inline MeanStd mean_std(std::span<const double> xs) {
    MeanStd r;
    if (xs.empty()) return r;
    r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return r;
}

// Monte Carlo baseline: each example draws as many labels from the class
// priors (with replacement) as it has true positives; macro F1 per trial.
inline MeanStd random_guess_f1(std::span<const double> priors, const Matrix& truths, std::size_t trials,
                               std::uint64_t seed) {
    if (trials < 1) throw ParameterError("random guess needs at least one trial");
    if (priors.size() != truths.cols) throw ValidationError("prior count differs from class count");
    double total = 0.0;
    for (double p : priors) {
        if (!(p >= 0.0)) throw ValidationError("priors must be non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) throw ValidationError("priors must sum to 1");

    Rng rng(seed);
    std::vector<double> scores;
    scores.reserve(trials);
    Matrix predicted(truths.rows, truths.cols);
    for (std::size_t t = 0; t < trials; ++t) {
        std::fill(predicted.data.begin(), predicted.data.end(), 0.0);
        for (std::size_t i = 0; i < truths.rows; ++i) {
            std::size_t k = 0;
            for (double v : truths.row(i)) k += v != 0.0;
            for (std::size_t draw = 0; draw < k; ++draw) {
                double u = rng.uniform() * total;
                std::size_t c = 0;
                while (c + 1 < priors.size() && (u -= priors[c]) >= 0.0) ++c;
                predicted(i, c) = 1.0;
            }
        }
        scores.push_back(macro_f1_binary(predicted, truths).macro_f1);
    }
    return mean_std(scores);
}

struct RunAggregate {
    std::vector<MeanStd> per_class;
    MeanStd macro;
    std::size_t runs = 0;
    bool single_run = false;  // std is reported as 0 with only one run
};

inline RunAggregate aggregate_runs(std::span<const RunSummary> runs) {
    if (runs.empty()) throw ValidationError("no runs to aggregate");
    const std::size_t m = runs[0].per_class_f1.size();
    for (const auto& r : runs)
        if (r.per_class_f1.size() != m) throw ValidationError("runs have inconsistent class lists");
    RunAggregate agg;
    agg.runs = runs.size();
    agg.single_run = runs.size() == 1;
    std::vector<double> col(runs.size());
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t r = 0; r < runs.size(); ++r) col[r] = runs[r].per_class_f1[c];
        agg.per_class.push_back(mean_std(col));
    }
    for (std::size_t r = 0; r < runs.size(); ++r) col[r] = runs[r].macro_f1;
    agg.macro = mean_std(col);
    return agg;
}

}  // namespace cprobe

#pragma once

// End-to-end perturbation study: perturb -> featurize -> train probes ->
// macro F1 -> aggregate over runs -> CSV + SVG. Every output is a pure
// function of the configuration (thread count and output directory excluded).
//
// Protocol. Records whose fnv1a64(image_id) % val_every == 0 form the
// validation split, the rest train. By default `runs` probes are trained on
// the intact training images (seeds seed, seed+1, ...) and each is scored on
// the perturbed validation images of every (family, target, level). With
// train_on = modified, a fresh set of probes is trained per level on the
// perturbed training images instead.

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cprobe/csv.hpp"
#include "cprobe/featurize.hpp"
#include "cprobe/manifest.hpp"
#include "cprobe/parallel.hpp"
#include "cprobe/perturb.hpp"
#include "cprobe/png_io.hpp"
#include "cprobe/probe.hpp"
#include "cprobe/report.hpp"
#include "cprobe/tensor.hpp"
#include "cprobe/transform.hpp"
#include "cprobe/version.hpp"

namespace cprobe {

struct PipelineConfig {
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::filesystem::path features_dir;  // empty: use the built-in featurizer
    std::uint64_t seed = 0;
    std::vector<Family> families{Family::Amount};
    std::vector<Target> targets{Target::Object, Target::Context};
    std::size_t runs = 5;
    Fill fill = Fill::Gray128;
    TrainConfig train{.l2 = 0.3};  // stronger than the probe default; 403 images x 240 features overfit at 1e-4
    std::optional<double> tau_pred;
    bool train_on_modified = false;
    unsigned threads = 0;
    TextureOptions texture{};
    std::size_t baseline_trials = 1000;
    std::uint64_t val_every = 5;
    FeaturizerConfig featurizer{};
    bool standardize = true;
};

namespace pipeline_detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        T v{};
        if constexpr (std::is_floating_point_v<T>) {
            v = static_cast<T>(std::stod(value, &used));
        } else {
            if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
            v = static_cast<T>(std::stoull(value, &used, 0));
        }
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': cannot parse '" + value + "'");
    }
}

inline std::string join_list(const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ",") + x;
    return s;
}

// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace pipeline_detail

// Applies one key=value setting. Keys mirror the pipeline CLI flags with
// dashes replaced by underscores.
inline void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    using namespace pipeline_detail;
    try {
        if (key == "manifest") cfg.manifest = value;
        else if (key == "out") cfg.out = value;
        else if (key == "features_dir") cfg.features_dir = value;
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "families") {
            cfg.families.clear();
            for (const auto& f : split_list(value)) cfg.families.push_back(parse_family(f));
        } else if (key == "targets") {
            cfg.targets.clear();
            for (const auto& t : split_list(value)) cfg.targets.push_back(parse_target(t));
        } else if (key == "runs") cfg.runs = parse_number<std::size_t>(key, value);
        else if (key == "fill") cfg.fill = parse_fill(value);
        else if (key == "lr") cfg.train.lr = parse_number<double>(key, value);
        else if (key == "epochs") cfg.train.epochs = parse_number<std::size_t>(key, value);
        else if (key == "batch") cfg.train.batch = parse_number<std::size_t>(key, value);
        else if (key == "l2") cfg.train.l2 = parse_number<double>(key, value);
        else if (key == "init_scale") cfg.train.init_scale = parse_number<double>(key, value);
        else if (key == "tau_pred") {
            if (value.empty()) cfg.tau_pred.reset();
            else cfg.tau_pred = parse_number<double>(key, value);
        } else if (key == "train_on") {
            if (value == "original") cfg.train_on_modified = false;
            else if (value == "modified") cfg.train_on_modified = true;
            else throw UsageError("train_on must be 'original' or 'modified'");
        } else if (key == "threads") cfg.threads = parse_number<unsigned>(key, value);
        else if (key == "tex_iters") cfg.texture.iterations = parse_number<int>(key, value);
        else if (key == "tex_levels") cfg.texture.levels = parse_number<int>(key, value);
        else if (key == "baseline_trials") cfg.baseline_trials = parse_number<std::size_t>(key, value);
        else if (key == "val_every") cfg.val_every = parse_number<std::uint64_t>(key, value);
        else if (key == "standardize") {
            if (value == "true" || value == "1") cfg.standardize = true;
            else if (value == "false" || value == "0") cfg.standardize = false;
            else throw UsageError("standardize must be true or false");
        } else if (key == "grid") cfg.featurizer.grid = parse_number<int>(key, value);
        else if (key == "bins") cfg.featurizer.bins = parse_number<int>(key, value);
        else throw UsageError("unknown config key '" + key + "'");
    } catch (const UsageError&) {
        throw;
    } catch (const Error& e) {
        throw UsageError("config key '" + key + "': " + e.what());
    }
}

// key=value lines; '#' starts a comment; blank lines ignored.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    using pipeline_detail::trim;
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream in(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
        auto key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '-', '_');
        if (key.empty()) throw ParseError(line_no, "empty key");
        out.emplace_back(key, trim(line.substr(eq + 1)));
    }
    return out;
}

inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// Settings that determine results, in a fixed order. Output directory and
// thread count are left out: neither changes any output byte.
inline std::map<std::string, std::string> result_settings(const PipelineConfig& cfg) {
    using namespace pipeline_detail;
    std::vector<std::string> fams, tars;
    for (auto f : cfg.families) fams.emplace_back(to_string(f));
    for (auto t : cfg.targets) tars.emplace_back(to_string(t));
    return {
        {"manifest", cfg.manifest.generic_string()},
        {"features_dir", cfg.features_dir.generic_string()},
        {"seed", std::to_string(cfg.seed)},
        {"families", join_list(fams)},
        {"targets", join_list(tars)},
        {"runs", std::to_string(cfg.runs)},
        {"fill", std::string(to_string(cfg.fill))},
        {"lr", fmt(cfg.train.lr)},
        {"epochs", std::to_string(cfg.train.epochs)},
        {"batch", std::to_string(cfg.train.batch)},
        {"l2", fmt(cfg.train.l2)},
        {"init_scale", fmt(cfg.train.init_scale)},
        {"tau_pred", cfg.tau_pred ? fmt(*cfg.tau_pred) : ""},
        {"train_on", cfg.train_on_modified ? "modified" : "original"},
        {"tex_iters", std::to_string(cfg.texture.iterations)},
        {"tex_levels", std::to_string(cfg.texture.levels)},
        {"baseline_trials", std::to_string(cfg.baseline_trials)},
        {"val_every", std::to_string(cfg.val_every)},
        {"standardize", cfg.standardize ? "true" : "false"},
        {"grid", std::to_string(cfg.featurizer.grid)},
        {"bins", std::to_string(cfg.featurizer.bins)},
    };
}

inline std::string config_hash(const PipelineConfig& cfg) {
    std::string canon;
    for (const auto& [k, v] : result_settings(cfg)) canon += k + "=" + v + "\n";
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(canon));
    return buf;
}

inline void validate(const PipelineConfig& cfg) {
    if (cfg.manifest.empty()) throw UsageError("pipeline needs a manifest");
    if (cfg.out.empty()) throw UsageError("pipeline needs an output directory");
    if (cfg.families.empty() || cfg.targets.empty()) throw UsageError("pipeline needs at least one family and target");
    if (cfg.runs < 1) throw UsageError("runs must be at least 1");
    if (cfg.val_every < 2) throw UsageError("val_every must be at least 2");
    if (cfg.baseline_trials < 1) throw UsageError("baseline_trials must be at least 1");
    if (cfg.featurizer.grid < 1 || cfg.featurizer.bins < 1 || cfg.featurizer.bins > 256)
        throw UsageError("featurizer grid and bins must be positive (bins <= 256)");
}

// One row of results.csv.
struct LevelResult {
    Family family;
    Target target;
    int level;
    RunAggregate aggregate;
};

struct PipelineOutcome {
    int status = 0;  // 0 success, 1 a stage failed
    std::string failed_stage;
    std::string message;
    std::vector<LevelResult> results;
    MeanStd baseline;
};

using PipelineLog = std::function<void(const std::string&)>;

namespace pipeline_detail {

struct Split {
    std::vector<const ManifestRecord*> train, val;
};

inline Split split_records(const std::vector<ManifestRecord>& records, std::uint64_t val_every) {
    std::vector<const ManifestRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const ManifestRecord* a, const ManifestRecord* b) { return a->image_id < b->image_id; });
    Split s;
    for (const auto* r : sorted) (fnv1a64(r->image_id) % val_every == 0 ? s.val : s.train).push_back(r);
    if (s.train.empty() || s.val.empty())
        throw ValidationError("train/validation split left one side empty (" + std::to_string(s.train.size()) +
                              " train, " + std::to_string(s.val.size()) + " validation)");
    return s;
}

inline std::vector<int> class_counts(const ManifestRecord& r, const std::vector<std::string>& classes) {
    std::vector<int> out;
    for (const auto& c : classes) {
        auto it = r.label_counts.find(c);
        out.push_back(it == r.label_counts.end() ? 0 : it->second);
    }
    return out;
}

inline Matrix truth_matrix(const std::vector<const ManifestRecord*>& recs, const std::vector<std::string>& classes) {
    Matrix t(recs.size(), classes.size());
    for (std::size_t i = 0; i < recs.size(); ++i)
        for (const auto& name : truth_labels(*recs[i])) {
            const auto it = std::lower_bound(classes.begin(), classes.end(), name);
            t(i, static_cast<std::size_t>(it - classes.begin())) = 1.0;
        }
    return t;
}

class FeatureSource {
public:
    FeatureSource(const PipelineConfig& cfg) : cfg_(cfg) {}

    // Features of each record, intact (spec empty) or perturbed by spec.
    Matrix rows(const std::vector<const ManifestRecord*>& recs, const std::optional<PerturbationSpec>& spec,
                unsigned threads) const {
        std::vector<std::vector<double>> feats(recs.size());
        parallel_for(recs.size(), threads, [&](std::size_t i) { feats[i] = one(*recs[i], spec); });
        const std::size_t d = feats.empty() ? 0 : feats[0].size();
        Matrix m(recs.size(), d);
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (feats[i].size() != d)
                throw ValidationError("feature length differs for " + recs[i]->image_id);
            std::copy(feats[i].begin(), feats[i].end(), m.row(i).begin());
        }
        return m;
    }

private:
    std::vector<double> one(const ManifestRecord& r, const std::optional<PerturbationSpec>& spec) const {
        if (!cfg_.features_dir.empty()) {
            std::string stem = r.image_id;
            if (spec) {
                stem = perturbed_name(r.image_id, *spec);
                stem.resize(stem.size() - 4);
            }
            const auto t = read_tensor(cfg_.features_dir / (stem + ".f32"));
            std::vector<double> v(t.data().begin(), t.data().end());
            return v;
        }
        const auto img = read_raster(resolve_image_path(cfg_.manifest, r));
        if (!spec) return featurize(img, cfg_.featurizer);
        PerturbationSpec s = *spec;
        s.seed = image_seed(spec->seed, r.image_id);
        const auto boxes = boxes_of(r);
        return featurize(apply_perturbation(img, boxes, s, cfg_.texture), cfg_.featurizer);
    }

    const PipelineConfig& cfg_;
};

inline std::vector<ProbeModel> train_models(const PipelineConfig& cfg, const Matrix& x,
                                            const std::vector<LabelDistribution>& targets, unsigned threads) {
    std::vector<ProbeModel> models(cfg.runs);
    parallel_for(cfg.runs, threads, [&](std::size_t r) {
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seed + r;
        models[r] = train_probe(x, targets, tc).model;
    });
    return models;
}

}  // namespace pipeline_detail

inline std::vector<csv::Row> results_rows(const std::vector<LevelResult>& results,
                                          const std::vector<std::string>& classes) {
    csv::Row header{"family", "target", "x", "macro_f1_mean", "macro_f1_std"};
    for (const auto& c : classes) {
        header.push_back(c + "_f1_mean");
        header.push_back(c + "_f1_std");
    }
    std::vector<csv::Row> rows{header};
    for (const auto& r : results) {
        csv::Row row{std::string(to_string(r.family)), std::string(to_string(r.target)), std::to_string(r.level),
                     csv::format(r.aggregate.macro.mean), csv::format(r.aggregate.macro.std)};
        for (const auto& pc : r.aggregate.per_class) {
            row.push_back(csv::format(pc.mean));
            row.push_back(csv::format(pc.std));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// Bar chart per family: one series per target, one bar per level.
inline std::vector<BarSeries> family_series(const std::vector<LevelResult>& results, Family family,
                                            std::optional<double> baseline) {
    std::vector<BarSeries> out;
    for (const auto& r : results) {
        if (r.family != family) continue;
        auto it = std::find_if(out.begin(), out.end(), [&](const BarSeries& s) { return s.name == to_string(r.target); });
        if (it == out.end()) {
            out.push_back(BarSeries{std::string(to_string(r.target)), {}, {}, {}, baseline});
            it = out.end() - 1;
        }
        it->labels.push_back("x=" + std::to_string(r.level));
        it->values.push_back(r.aggregate.macro.mean);
        it->errors.push_back(r.aggregate.macro.std);
    }
    return out;
}

// Runs every stage; a failing stage leaves earlier outputs in place, writes
// <out>/FAILED naming the stage, and yields status 1. Configuration problems
// are raised as UsageError before anything is written.
inline PipelineOutcome run_pipeline(const PipelineConfig& cfg, const PipelineLog& log = {}) {
    using namespace pipeline_detail;
    validate(cfg);
    if (!std::filesystem::exists(cfg.manifest)) throw UsageError("manifest not found: " + cfg.manifest.string());
    const auto note = [&](const std::string& m) {
        if (log) log(m);
    };

    std::filesystem::create_directories(cfg.out);
    std::filesystem::remove(cfg.out / "FAILED");
    const unsigned threads = resolve_threads(cfg.threads);

    PipelineOutcome outcome;
    std::string stage;
    try {
        stage = "load";
        const auto records = parse_manifest(cfg.manifest);
        const auto classes = intent_classes(records);
        if (classes.size() < 2) throw ValidationError("need at least two intent classes");
        const auto split = split_records(records, cfg.val_every);
        note("loaded " + std::to_string(records.size()) + " records: " + std::to_string(split.train.size()) +
             " train, " + std::to_string(split.val.size()) + " validation, " + std::to_string(classes.size()) +
             " classes");

        std::vector<LabelDistribution> train_targets;
        for (const auto* r : split.train)
            train_targets.push_back(normalize_target(class_counts(*r, classes), r->annotator_total));
        const Matrix val_truth = truth_matrix(split.val, classes);
        const FeatureSource source(cfg);

        stage = "train";
        Matrix train_x = source.rows(split.train, std::nullopt, threads);
        Standardizer scaler;
        if (cfg.standardize) {
            scaler = Standardizer::fit(train_x);
            scaler.apply(train_x);
        }
        std::vector<ProbeModel> models;
        if (!cfg.train_on_modified) {
            models = train_models(cfg, train_x, train_targets, threads);
            note("trained " + std::to_string(models.size()) + " probes on intact training images");
        }

        stage = "evaluate";
        for (const auto family : cfg.families)
            for (const auto target : cfg.targets)
                for (int x = 0; x <= max_level(family); ++x) {
                    const PerturbationSpec spec{target, family, x, cfg.seed, cfg.fill};
                    std::vector<ProbeModel> level_models;
                    const std::vector<ProbeModel>* use = &models;
                    if (cfg.train_on_modified) {
                        Matrix tx = source.rows(split.train, spec, threads);
                        if (cfg.standardize) {
                            scaler = Standardizer::fit(tx);
                            scaler.apply(tx);
                        }
                        level_models = train_models(cfg, tx, train_targets, threads);
                        use = &level_models;
                    }
                    Matrix vx = source.rows(split.val, spec, threads);
                    if (cfg.standardize) scaler.apply(vx);
                    std::vector<RunSummary> runs;
                    for (std::size_t r = 0; r < use->size(); ++r) {
                        auto s = macro_f1(predict_proba((*use)[r], vx), val_truth, cfg.tau_pred);
                        s.seed = cfg.seed + r;
                        runs.push_back(std::move(s));
                    }
                    outcome.results.push_back({family, target, x, aggregate_runs(runs)});
                    const auto& agg = outcome.results.back().aggregate;
                    note(std::string(to_string(family)) + " " + std::string(to_string(target)) + " x=" +
                         std::to_string(x) + ": macro F1 " + csv::format(agg.macro.mean, 4) + " +- " +
                         csv::format(agg.macro.std, 4));
                }
        csv::write(cfg.out / "results.csv", results_rows(outcome.results, classes));

        stage = "baseline";
        std::vector<double> priors(classes.size(), 0.0);
        const Matrix train_truth = truth_matrix(split.train, classes);
        double total = 0.0;
        for (double v : train_truth.data) total += v;
        for (std::size_t i = 0; i < train_truth.rows; ++i)
            for (std::size_t c = 0; c < classes.size(); ++c) priors[c] += train_truth(i, c) / total;
        outcome.baseline = random_guess_f1(priors, val_truth, cfg.baseline_trials, cfg.seed);
        csv::write(cfg.out / "baseline.csv",
                   {{"macro_f1_mean", "macro_f1_std", "trials"},
                    {csv::format(outcome.baseline.mean), csv::format(outcome.baseline.std),
                     std::to_string(cfg.baseline_trials)}});

        stage = "report";
        std::vector<std::string> outputs{"results.csv", "baseline.csv"};
        for (const auto family : cfg.families) {
            const std::string name = "fig_" + std::string(to_string(family)) + ".svg";
            emit_bars(family_series(outcome.results, family, outcome.baseline.mean), cfg.out / name);
            outputs.push_back(name);
        }

        nlohmann::json run;
        run["tool"] = "content_probe";
        run["version"] = version;
        run["seed"] = cfg.seed;
        run["config_hash"] = config_hash(cfg);
        run["config"] = result_settings(cfg);
        run["classes"] = classes;
        run["train_images"] = split.train.size();
        run["validation_images"] = split.val.size();
        run["outputs"] = outputs;
        std::ofstream(cfg.out / "run.json", std::ios::binary | std::ios::trunc) << run.dump(2) << '\n';
    } catch (const std::exception& e) {
        outcome.status = 1;
        outcome.failed_stage = stage;
        outcome.message = e.what();
        std::ofstream(cfg.out / "FAILED", std::ios::binary | std::ios::trunc)
            << "stage: " << stage << "\nerror: " << e.what() << '\n';
        note("stage '" + stage + "' failed: " + e.what());
    }
    return outcome;
}

}  // namespace cprobe

// content_probe: command-line front end for the cprobe toolkit.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cprobe/attribution.hpp"
#include "cprobe/csv.hpp"
#include "cprobe/hashtag.hpp"
#include "cprobe/manifest.hpp"
#include "cprobe/parallel.hpp"
#include "cprobe/pipeline.hpp"
#include "cprobe/png_io.hpp"
#include "cprobe/probe.hpp"
#include "cprobe/report.hpp"
#include "cprobe/retrieval.hpp"
#include "cprobe/synthetic.hpp"
#include "cprobe/transform.hpp"
#include "cprobe/version.hpp"

namespace fs = std::filesystem;
using namespace cprobe;

namespace {

struct Globals {
    unsigned threads = 0;
    std::string log_level = "info";
};

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
}

// Rows of a features tensor: rank 2 as is, rank 1 as a single row.
Matrix feature_matrix(const fs::path& path) {
    const auto t = read_tensor(path);
    if (t.rank() == 1) {
        Matrix m(1, t.dim(0));
        std::copy(t.data().begin(), t.data().end(), m.data.begin());
        return m;
    }
    return Matrix::from_tensor(t);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(item, &used, 0));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad seed '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("--seeds needs at least one seed");
    return out;
}

// Soft targets and truth labels for the records, in the given class order.
struct Labels {
    std::vector<LabelDistribution> targets;
    Matrix truths;
};

Labels labels_for(const std::vector<ManifestRecord>& recs, const std::vector<std::string>& classes) {
    Labels l;
    l.truths = Matrix(recs.size(), classes.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        std::vector<int> counts;
        for (const auto& c : classes) {
            auto it = recs[i].label_counts.find(c);
            counts.push_back(it == recs[i].label_counts.end() ? 0 : it->second);
        }
        for (const auto& [k, v] : recs[i].label_counts)
            if (!std::binary_search(classes.begin(), classes.end(), k))
                throw ValidationError("record '" + recs[i].image_id + "' uses class '" + k +
                                      "' unknown to the model");
        l.targets.push_back(normalize_target(counts, recs[i].annotator_total));
        for (const auto& name : truth_labels(recs[i])) {
            auto it = std::lower_bound(classes.begin(), classes.end(), name);
            l.truths(i, static_cast<std::size_t>(it - classes.begin())) = 1.0;
        }
    }
    return l;
}

void check_rows(const Matrix& x, std::size_t records, const std::string& what) {
    if (x.rows != records)
        throw ValidationError(what + " has " + std::to_string(x.rows) + " rows but the manifest has " +
                              std::to_string(records) + " records");
}

fs::path classes_path(const fs::path& model) { return fs::path(model.string() + ".classes"); }

// ---------------------------------------------------------------------------

void cmd_perturb(const Globals& g, const std::string& manifest, const std::string& family, const std::string& target,
                 int level, std::uint64_t seed, const std::string& fill, const std::string& out, int tex_iters,
                 int tex_levels) {
    const PerturbationSpec spec{parse_target(target), parse_family(family), level, seed, parse_fill(fill)};
    spec.validate();
    TextureOptions tex;
    tex.iterations = tex_iters;
    tex.levels = tex_levels;
    const auto records = parse_manifest(manifest);
    fs::create_directories(out);
    parallel_for(records.size(), resolve_threads(g.threads), [&](std::size_t i) {
        const auto& r = records[i];
        PerturbationSpec s = spec;
        s.seed = image_seed(seed, r.image_id);
        const auto img = read_raster(resolve_image_path(manifest, r));
        try {
            write_raster(apply_perturbation(img, boxes_of(r), s, tex), fs::path(out) / perturbed_name(r.image_id, spec));
        } catch (const Error& e) {
            throw Error("image '" + r.image_id + "': " + e.what());
        }
    });
    spdlog::info("wrote {} images to {}", records.size(), out);
}

void cmd_correlate(const std::string& manifest, const std::string& cam_dir, const std::string& pano_dir,
                   const AttributionConfig& cfg, const std::string& out, bool permissive) {
    cfg.validate();
    const auto records = parse_manifest(manifest);
    // Panoptic maps: every <pano_dir>/<image_id>__<class>.f32.
    std::map<std::string, std::vector<std::pair<std::string, fs::path>>> pano_files;
    for (const auto& entry : fs::directory_iterator(pano_dir)) {
        if (entry.path().extension() != ".f32") continue;
        const auto stem = entry.path().stem().string();
        const auto sep = stem.find("__");
        if (sep == std::string::npos) continue;
        pano_files[stem.substr(0, sep)].emplace_back(stem.substr(sep + 2), entry.path());
    }
    std::vector<AttributionSample> samples;
    for (const auto& r : records) {
        AttributionSample s;
        s.image_id = r.image_id;
        s.intent_labels = truth_labels(r);
        try {
            for (const auto& m : s.intent_labels) {
                const fs::path p = fs::path(cam_dir) / (r.image_id + "__" + m + ".f32");
                if (fs::exists(p)) s.cams.emplace(m, HeatMap::from_tensor(read_tensor(p)));
            }
            if (auto it = pano_files.find(r.image_id); it != pano_files.end())
                for (const auto& [cls, path] : it->second) s.panos.emplace(cls, HeatMap::from_tensor(read_tensor(path)));
        } catch (const Error& e) {
            if (!permissive) throw Error("image '" + r.image_id + "': " + e.what());
            spdlog::warn("skipping image '{}': {}", r.image_id, e.what());
            continue;
        }
        samples.push_back(std::move(s));
    }
    const auto res = correlation_matrix(samples, cfg, permissive);
    for (const auto& s : res.skipped) spdlog::warn("skipped image '{}': {}", s.image_id, s.reason);
    fs::path values(out), support(out);
    support.replace_extension(".support.csv");
    write_matrix_csv(res.matrix, values, support);
    spdlog::info("matrix {}x{} written to {}", res.matrix.pano_classes.size(), res.matrix.intent_classes.size(),
                 values.string());
}

void cmd_hashtags_segment(const std::string& dict_path, const std::string& in, const std::string& out,
                          std::size_t max_tokens) {
    const auto dict = load_dictionary(dict_path);
    std::ofstream file;
    if (!out.empty()) {
        file.open(out, std::ios::binary | std::ios::trunc);
        if (!file) throw Error("cannot write " + out);
    }
    std::ostream& os = out.empty() ? std::cout : file;
    std::size_t kept = 0, total = 0;
    for (const auto& raw : read_lines(in)) {
        ++total;
        std::vector<std::string> one{raw};
        const auto rec = filter_hashtags(one, dict, max_tokens);
        os << raw << '\t';
        if (rec.empty()) {
            os << "rejected\t\n";
            continue;
        }
        ++kept;
        os << "ok\t";
        for (std::size_t i = 0; i < rec[0].tokens.size(); ++i) os << (i ? " " : "") << rec[0].tokens[i];
        os << '\n';
    }
    spdlog::info("segmented {} of {} hashtags", kept, total);
}

void cmd_hashtags_embed(const std::string& dict_path, const std::string& table_path, const std::string& manifest,
                        const std::string& out, std::size_t max_tokens) {
    const auto dict = load_dictionary(dict_path);
    const auto table = load_embedding_table(table_path);
    const auto records = parse_manifest(manifest);
    std::vector<float> data;
    std::size_t empty = 0;
    std::vector<std::string> ids;
    for (const auto& r : records) {
        const std::vector<std::string> tags = r.hashtags.value_or(std::vector<std::string>{});
        const auto f = aggregate_image_hashtags(filter_hashtags(tags, dict, max_tokens), table);
        empty += f.empty;
        data.insert(data.end(), f.vector.begin(), f.vector.end());
        ids.push_back(r.image_id);
    }
    write_tensor(Tensor({records.size(), table.dim()}, std::move(data)), out);
    write_lines(out + ".ids", ids);
    spdlog::info("embedded {} images ({} without usable hashtags)", records.size(), empty);
}

void cmd_rmac(const Globals& g, const std::string& acts_dir, int scales, const std::string& out) {
    if (scales < 1) throw ParameterError("--scales must be at least 1");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(acts_dir))
        if (e.path().extension() == ".f32") files.push_back(e.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });
    if (files.empty()) throw ValidationError("no .f32 activation files in " + acts_dir);
    std::vector<std::vector<float>> desc(files.size());
    parallel_for(files.size(), resolve_threads(g.threads),
                 [&](std::size_t i) { desc[i] = rmac(ActivationMap(read_tensor(files[i])), scales); });
    const std::size_t d = desc[0].size();
    std::vector<float> data;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (desc[i].size() != d) throw ValidationError(files[i].string() + ": channel count differs from the first map");
        data.insert(data.end(), desc[i].begin(), desc[i].end());
        ids.push_back(files[i].stem().string());
    }
    write_tensor(Tensor({files.size(), d}, std::move(data)), out);
    write_lines(out + ".ids", ids);
    spdlog::info("{} descriptors of dimension {} written to {}", files.size(), d, out);
}

DescriptorIndex index_from(const std::string& desc, const std::string& ids_path) {
    const auto t = read_tensor(desc);
    if (t.rank() != 2) throw ValidationError("descriptor tensor must be N x D");
    const auto ids = read_lines(ids_path);
    if (ids.size() != t.dim(0))
        throw ValidationError("ids file has " + std::to_string(ids.size()) + " lines for " + std::to_string(t.dim(0)) +
                              " descriptors");
    DescriptorIndex idx;
    for (std::size_t i = 0; i < ids.size(); ++i) idx.add(ids[i], t.row(i));
    return idx;
}

struct Queries {
    Matrix x;
    std::vector<std::string> ids;
};

Queries load_queries(const std::string& path, const std::string& ids_path) {
    Queries q{feature_matrix(path), {}};
    if (!ids_path.empty()) {
        q.ids = read_lines(ids_path);
        if (q.ids.size() != q.x.rows) throw ValidationError("query ids do not match the query rows");
    } else {
        for (std::size_t i = 0; i < q.x.rows; ++i) q.ids.push_back(std::to_string(i));
    }
    return q;
}

std::vector<float> as_float(std::span<const double> v) { return {v.begin(), v.end()}; }

void cmd_knn_query(const std::string& index_path, const std::string& query, const std::string& query_ids,
                   std::size_t k) {
    const auto idx = DescriptorIndex::load(index_path);
    const auto q = load_queries(query, query_ids);
    std::cout << "query,rank,id,similarity\n";
    for (std::size_t i = 0; i < q.x.rows; ++i) {
        const auto hits = knn_query(idx, as_float(q.x.row(i)), k);
        for (std::size_t r = 0; r < hits.size(); ++r)
            std::cout << csv::join({q.ids[i], std::to_string(r + 1), hits[r].id, csv::format(hits[r].similarity)})
                      << '\n';
    }
}

void cmd_knn_link(const std::string& index_path, const std::string& neighbors_manifest, const std::string& query,
                  const std::string& query_ids, std::size_t k, const std::string& out) {
    const auto idx = DescriptorIndex::load(index_path);
    std::map<std::string, std::vector<std::string>> tags;
    for (const auto& r : parse_manifest(neighbors_manifest)) tags[r.image_id] = r.hashtags.value_or(std::vector<std::string>{});
    const auto q = load_queries(query, query_ids);
    std::ofstream os(out, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + out);
    for (std::size_t i = 0; i < q.x.rows; ++i) {
        nlohmann::ordered_json line;
        line["query"] = q.ids[i];
        auto& neighbors = line["neighbors"] = nlohmann::ordered_json::array();
        std::vector<std::string> collected;
        std::set<std::string> seen;
        for (const auto& n : knn_query(idx, as_float(q.x.row(i)), k)) {
            neighbors.push_back({{"id", n.id}, {"similarity", n.similarity}});
            auto it = tags.find(n.id);
            if (it == tags.end()) continue;
            for (const auto& t : it->second)
                if (seen.insert(t).second) collected.push_back(t);
        }
        line["hashtags"] = collected;
        os << line.dump() << '\n';
    }
    spdlog::info("linked {} queries", q.x.rows);
}

void cmd_probe_train(const std::string& features, const std::string& manifest, const TrainConfig& cfg,
                     const std::string& out) {
    const auto records = parse_manifest(manifest);
    const auto classes = intent_classes(records);
    const auto x = feature_matrix(features);
    check_rows(x, records.size(), features);
    const auto labels = labels_for(records, classes);
    const auto res = train_probe(x, labels.targets, cfg);
    write_tensor(res.model.to_tensor(), out);
    write_lines(classes_path(out), classes);
    spdlog::info("trained probe: {} classes, {} features, final loss {:.6f}", classes.size(), x.cols, res.final_loss());
}

std::vector<csv::Row> summary_rows(const RunSummary& s, const std::vector<std::string>& classes) {
    std::vector<csv::Row> rows{{"class", "f1"}};
    for (std::size_t c = 0; c < classes.size(); ++c) rows.push_back({classes[c], csv::format(s.per_class_f1[c])});
    rows.push_back({"macro", csv::format(s.macro_f1)});
    return rows;
}

void emit_rows(const std::vector<csv::Row>& rows, const std::string& out) {
    if (!out.empty()) {
        csv::write(out, rows);
        return;
    }
    for (const auto& r : rows) std::cout << csv::join(r) << '\n';
}

void cmd_probe_eval(const std::string& model_path, const std::string& features, const std::string& manifest,
                    std::optional<double> tau, const std::string& out) {
    const auto model = ProbeModel::from_tensor(read_tensor(model_path));
    const auto classes = read_lines(classes_path(model_path));
    if (classes.size() != model.classes) throw ValidationError("class list does not match the model");
    const auto records = parse_manifest(manifest);
    const auto x = feature_matrix(features);
    check_rows(x, records.size(), features);
    const auto labels = labels_for(records, classes);
    const auto s = macro_f1(predict_proba(model, x), labels.truths, tau);
    for (auto c : s.undefined_classes) spdlog::warn("class '{}' has no true or predicted positives; F1 set to 0", classes[c]);
    emit_rows(summary_rows(s, classes), out);
}

struct RunsOptions {
    std::string features, manifest, eval_features, eval_manifest, seeds, out, family = "none", target = "none";
    int level = 0;
    bool append = false;
    std::optional<double> tau;
};

void cmd_probe_runs(const RunsOptions& o, TrainConfig cfg) {
    const auto records = parse_manifest(o.manifest);
    const auto classes = intent_classes(records);
    const auto x = feature_matrix(o.features);
    check_rows(x, records.size(), o.features);
    const auto train = labels_for(records, classes);
    const auto eval_records = o.eval_manifest.empty() ? records : parse_manifest(o.eval_manifest);
    const auto ex = o.eval_features.empty() ? x : feature_matrix(o.eval_features);
    check_rows(ex, eval_records.size(), o.eval_features.empty() ? o.features : o.eval_features);
    const auto eval = labels_for(eval_records, classes);
    std::vector<RunSummary> runs;
    for (auto seed : parse_seed_list(o.seeds)) {
        cfg.seed = seed;
        auto s = macro_f1(predict_proba(train_probe(x, train.targets, cfg).model, ex), eval.truths, o.tau);
        s.seed = seed;
        runs.push_back(std::move(s));
    }
    const LevelResult row{Family::Amount, Target::Object, o.level, aggregate_runs(runs)};
    auto rows = results_rows({row}, classes);
    rows[1][0] = o.family;
    rows[1][1] = o.target;
    if (o.out.empty()) {
        emit_rows(rows, "");
        return;
    }
    if (o.append && fs::exists(o.out)) {
        auto existing = csv::read(o.out);
        if (existing.empty() || existing[0] != rows[0]) throw ValidationError(o.out + ": header differs, cannot append");
        existing.push_back(rows[1]);
        rows = std::move(existing);
    }
    csv::write(o.out, rows);
}

// Bars from a results CSV: one series per (family, target), one bar per level.
void cmd_report_bars(const std::string& csv_path, const std::string& out, const std::string& baseline) {
    const auto rows = csv::read(csv_path);
    if (rows.empty()) throw FormatError(csv_path + ": empty results file");
    const auto& h = rows[0];
    const auto col = [&](const std::string& name) {
        auto it = std::find(h.begin(), h.end(), name);
        if (it == h.end()) throw FormatError(csv_path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - h.begin());
    };
    const auto cf = col("family"), ct = col("target"), cx = col("x"), cm = col("macro_f1_mean"), cs = col("macro_f1_std");
    std::optional<double> base;
    if (!baseline.empty()) {
        if (fs::exists(baseline)) {
            const auto b = csv::read(baseline);
            if (b.size() < 2 || b[0].empty() || b[0][0] != "macro_f1_mean")
                throw FormatError(baseline + ": expected a baseline CSV with macro_f1_mean first");
            base = csv::to_double(b[1][0], "baseline");
        } else {
            base = csv::to_double(baseline, "baseline");
        }
    }
    std::set<std::string> families;
    for (std::size_t r = 1; r < rows.size(); ++r) families.insert(rows[r].at(cf));
    std::vector<BarSeries> series;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != h.size()) throw FormatError(csv_path + ": row " + std::to_string(r + 1) + " is ragged");
        const std::string name = families.size() > 1 ? row[cf] + " " + row[ct] : row[ct];
        auto it = std::find_if(series.begin(), series.end(), [&](const BarSeries& s) { return s.name == name; });
        if (it == series.end()) {
            series.push_back(BarSeries{name, {}, {}, {}, base});
            it = series.end() - 1;
        }
        it->labels.push_back("x=" + row[cx]);
        it->values.push_back(csv::to_double(row[cm], "macro_f1_mean"));
        it->errors.push_back(csv::to_double(row[cs], "macro_f1_std"));
    }
    emit_bars(series, out);
}

int run_pipeline_cmd(const Globals& g, const std::string& config_file, std::map<std::string, std::string> flags) {
    PipelineConfig cfg;
    std::map<std::string, std::string> merged;
    if (!config_file.empty())
        for (auto& [k, v] : read_config_file(config_file)) merged[k] = v;
    for (auto& [k, v] : flags) merged[k] = v;
    if (!merged.contains("seed")) throw UsageError("pipeline needs a seed (--seed or seed= in the config)");
    if (g.threads) merged.try_emplace("threads", std::to_string(g.threads));
    for (const auto& [k, v] : merged) apply_setting(cfg, k, v);
    if (!config_file.empty() && cfg.manifest.is_relative() && !flags.contains("manifest"))
        cfg.manifest = fs::path(config_file).parent_path() / cfg.manifest;
    const auto outcome = run_pipeline(cfg, [](const std::string& m) { spdlog::info("{}", m); });
    if (outcome.status != 0) spdlog::error("pipeline failed in stage '{}': {}", outcome.failed_stage, outcome.message);
    else spdlog::info("outputs written to {}", cfg.out.string());
    return outcome.status;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("content_probe");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);

    CLI::App app{"content_probe: content perturbation and intent analysis toolkit"};
    app.set_version_flag("--version", std::string(cprobe::version));
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads (0 = one per core; CONTENT_PROBE_THREADS overrides)");
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, critical or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

    std::function<int()> action;

    // perturb
    auto* perturb = app.add_subcommand("perturb", "Apply one perturbation to every image in a manifest");
    struct {
        std::string manifest, family, target, fill = "gray", out;
        int level = 0, tex_iters = 10, tex_levels = 3;
        std::uint64_t seed = 0;
    } pa;
    perturb->add_option("--manifest", pa.manifest)->required();
    perturb->add_option("--family", pa.family)->required()->check(CLI::IsMember({"amount", "jigsaw", "blur", "texture"}));
    perturb->add_option("--target", pa.target)->required()->check(CLI::IsMember({"object", "context"}));
    perturb->add_option("--level", pa.level)->required();
    perturb->add_option("--seed", pa.seed)->required();
    perturb->add_option("--fill", pa.fill)->check(CLI::IsMember({"gray", "mean", "black"}));
    perturb->add_option("--out", pa.out)->required();
    perturb->add_option("--tex-iters", pa.tex_iters, "Texture synthesis rounds");
    perturb->add_option("--tex-levels", pa.tex_levels, "Texture pyramid levels");
    perturb->callback([&] {
        action = [&] {
            cmd_perturb(g, pa.manifest, pa.family, pa.target, pa.level, pa.seed, pa.fill, pa.out, pa.tex_iters,
                        pa.tex_levels);
            return 0;
        };
    });

    // correlate
    auto* correlate = app.add_subcommand("correlate", "CAM / panoptic correlation matrix");
    struct {
        std::string manifest, cam_dir, pano_dir, out;
        AttributionConfig cfg;
        bool permissive = false;
    } ca;
    correlate->add_option("--manifest", ca.manifest)->required();
    correlate->add_option("--cam-dir", ca.cam_dir, "<image_id>__<intent>.f32 heat maps")->required();
    correlate->add_option("--pano-dir", ca.pano_dir, "<image_id>__<panoptic>.f32 score maps")->required();
    correlate->add_option("--tau-cam", ca.cfg.tau_cam, "CAM threshold relative to the map maximum");
    correlate->add_option("--tau-p", ca.cfg.tau_p, "Absolute panoptic score threshold");
    correlate->add_flag("--pooled", ca.cfg.pooled, "Pool pixel counts instead of averaging per-image ratios");
    correlate->add_flag("--permissive", ca.permissive, "Skip and report failing images instead of aborting");
    correlate->add_option("--out", ca.out, "Matrix CSV; support goes to <out>.support.csv")->required();
    correlate->callback([&] {
        action = [&] {
            cmd_correlate(ca.manifest, ca.cam_dir, ca.pano_dir, ca.cfg, ca.out, ca.permissive);
            return 0;
        };
    });

    // hashtags
    auto* hashtags = app.add_subcommand("hashtags", "Hashtag segmentation and embedding");
    hashtags->require_subcommand(1);
    hashtags->fallthrough();
    struct {
        std::string dict, in, out, table, manifest;
        std::size_t max_tokens = 6;
    } ha;
    auto* segment = hashtags->add_subcommand("segment", "Word-break each hashtag in a file (one per line)");
    segment->add_option("--dict", ha.dict)->required();
    segment->add_option("--in", ha.in)->required();
    segment->add_option("--out", ha.out, "TSV output (default stdout)");
    segment->add_option("--max-tokens", ha.max_tokens);
    segment->callback([&] {
        action = [&] {
            cmd_hashtags_segment(ha.dict, ha.in, ha.out, ha.max_tokens);
            return 0;
        };
    });
    auto* embed = hashtags->add_subcommand("embed", "Per-image hashtag features (N x d tensor)");
    embed->add_option("--dict", ha.dict)->required();
    embed->add_option("--table", ha.table)->required();
    embed->add_option("--manifest", ha.manifest)->required();
    embed->add_option("--out", ha.out)->required();
    embed->add_option("--max-tokens", ha.max_tokens);
    embed->callback([&] {
        action = [&] {
            cmd_hashtags_embed(ha.dict, ha.table, ha.manifest, ha.out, ha.max_tokens);
            return 0;
        };
    });

    // rmac
    auto* rmac_cmd = app.add_subcommand("rmac", "R-MAC descriptors from C x H x W activation tensors");
    struct {
        std::string acts, out;
        int scales = 3;
    } ra;
    rmac_cmd->add_option("--acts-dir", ra.acts)->required();
    rmac_cmd->add_option("--scales", ra.scales);
    rmac_cmd->add_option("--out", ra.out, "N x C tensor; ids go to <out>.ids")->required();
    rmac_cmd->callback([&] {
        action = [&] {
            cmd_rmac(g, ra.acts, ra.scales, ra.out);
            return 0;
        };
    });

    // knn
    auto* knn = app.add_subcommand("knn", "Exact cosine nearest-neighbor index");
    knn->require_subcommand(1);
    knn->fallthrough();
    struct {
        std::string desc, ids, out, index, query, query_ids, manifest;
        std::size_t k = 0;
    } ka;
    auto* build = knn->add_subcommand("build", "Build an index from descriptors and ids");
    build->add_option("--desc", ka.desc)->required();
    build->add_option("--ids", ka.ids)->required();
    build->add_option("--out", ka.out)->required();
    build->callback([&] {
        action = [&] {
            const auto idx = index_from(ka.desc, ka.ids);
            idx.save(ka.out);
            spdlog::info("index of {} items written to {}", idx.size(), ka.out);
            return 0;
        };
    });
    auto* query = knn->add_subcommand("query", "Top-k neighbors for each query row (CSV to stdout)");
    query->add_option("--index", ka.index)->required();
    query->add_option("--query", ka.query, "D or N x D tensor")->required();
    query->add_option("--query-ids", ka.query_ids, "Names for the query rows");
    query->add_option("--k", ka.k)->required()->check(CLI::PositiveNumber);
    query->callback([&] {
        action = [&] {
            cmd_knn_query(ka.index, ka.query, ka.query_ids, ka.k);
            return 0;
        };
    });
    auto* link = knn->add_subcommand("link", "Collect neighbors' hashtags for each query");
    link->add_option("--index", ka.index)->required();
    link->add_option("--neighbors-manifest", ka.manifest)->required();
    link->add_option("--query", ka.query)->required();
    link->add_option("--query-ids", ka.query_ids);
    link->add_option("--k", ka.k)->required()->check(CLI::PositiveNumber);
    link->add_option("--out", ka.out)->required();
    link->callback([&] {
        action = [&] {
            cmd_knn_link(ka.index, ka.manifest, ka.query, ka.query_ids, ka.k, ka.out);
            return 0;
        };
    });

    // probe
    auto* probe = app.add_subcommand("probe", "Linear soft-target probe");
    probe->require_subcommand(1);
    probe->fallthrough();
    TrainConfig tc;
    std::string features, manifest, model, out;
    std::optional<double> tau;
    const auto train_flags = [&](CLI::App* c) {
        c->add_option("--lr", tc.lr);
        c->add_option("--epochs", tc.epochs);
        c->add_option("--batch", tc.batch);
        c->add_option("--l2", tc.l2);
        c->add_option("--init-scale", tc.init_scale);
    };
    auto* ptrain = probe->add_subcommand("train", "Train a probe; writes the model and <out>.classes");
    ptrain->add_option("--features", features, "N x D tensor, rows in manifest order")->required();
    ptrain->add_option("--manifest", manifest)->required();
    ptrain->add_option("--seed", tc.seed)->required();
    ptrain->add_option("--out", out)->required();
    train_flags(ptrain);
    ptrain->callback([&] {
        action = [&] {
            cmd_probe_train(features, manifest, tc, out);
            return 0;
        };
    });
    auto* peval = probe->add_subcommand("eval", "Per-class F1 of a trained probe");
    peval->add_option("--model", model)->required();
    peval->add_option("--features", features)->required();
    peval->add_option("--manifest", manifest)->required();
    peval->add_option("--tau-pred", tau, "Prediction threshold (default 1/M)");
    peval->add_option("--out", out, "CSV output (default stdout)");
    peval->callback([&] {
        action = [&] {
            cmd_probe_eval(model, features, manifest, tau, out);
            return 0;
        };
    });
    RunsOptions ro;
    auto* pruns = probe->add_subcommand("runs", "Train once per seed; mean/std row in the results schema");
    pruns->add_option("--features", ro.features)->required();
    pruns->add_option("--manifest", ro.manifest)->required();
    pruns->add_option("--eval-features", ro.eval_features, "Evaluate on these features (default: training set)");
    pruns->add_option("--eval-manifest", ro.eval_manifest);
    pruns->add_option("--seeds", ro.seeds, "Comma-separated seeds")->required();
    pruns->add_option("--family", ro.family);
    pruns->add_option("--target", ro.target);
    pruns->add_option("--level", ro.level);
    pruns->add_option("--tau-pred", ro.tau);
    pruns->add_option("--out", ro.out, "CSV output (default stdout)");
    pruns->add_flag("--append", ro.append, "Append the row to an existing results CSV");
    train_flags(pruns);
    pruns->callback([&] {
        action = [&] {
            cmd_probe_runs(ro, tc);
            return 0;
        };
    });

    // report
    auto* report = app.add_subcommand("report", "SVG figures");
    report->require_subcommand(1);
    report->fallthrough();
    std::string report_csv, report_baseline, matrix;
    auto* bars = report->add_subcommand("bars", "Bar chart of macro F1 per level");
    bars->add_option("--csv", report_csv)->required();
    bars->add_option("--baseline", report_baseline, "Baseline CSV or a number");
    bars->add_option("--out", out)->required();
    bars->callback([&] {
        action = [&] {
            cmd_report_bars(report_csv, out, report_baseline);
            return 0;
        };
    });
    auto* heat = report->add_subcommand("heatgrid", "Heat grid of a correlation matrix");
    heat->add_option("--matrix", matrix)->required();
    heat->add_option("--out", out)->required();
    heat->callback([&] {
        action = [&] {
            emit_heatgrid(read_matrix_csv(matrix), out);
            return 0;
        };
    });

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "End-to-end perturbation study");
    std::string config_file;
    std::map<std::string, std::string> pflags;
    pipe->add_option("--config", config_file, "key=value file; flags win");
    const std::vector<std::pair<std::string, std::string>> pipe_keys{
        {"manifest", "Manifest (JSON lines)"},
        {"out", "Output directory"},
        {"features-dir", "External features <dir>/<name>.f32 instead of the built-in featurizer"},
        {"seed", "Global seed"},
        {"families", "Comma list of amount, jigsaw, blur, texture"},
        {"targets", "Comma list of object, context"},
        {"runs", "Probes per level"},
        {"fill", "gray, mean or black"},
        {"lr", "Learning rate"},
        {"epochs", "Training epochs"},
        {"batch", "Mini-batch size"},
        {"l2", "Weight decay"},
        {"init-scale", "Std of the weight init"},
        {"tau-pred", "Prediction threshold (default 1/M)"},
        {"train-on", "original or modified"},
        {"tex-iters", "Texture synthesis rounds"},
        {"tex-levels", "Texture pyramid levels"},
        {"baseline-trials", "Random-guess trials"},
        {"val-every", "One in N images (by id hash) is validation"},
        {"standardize", "z-score features (true/false)"},
        {"grid", "Featurizer thumbnail side"},
        {"bins", "Featurizer histogram bins"},
    };
    std::map<std::string, std::string> pvalues;
    for (const auto& [flag, help] : pipe_keys) pipe->add_option("--" + flag, pvalues[flag], help);
    pipe->callback([&] {
        action = [&] {
            for (const auto& [flag, help] : pipe_keys)
                if (pipe->count("--" + flag)) {
                    std::string key = flag;
                    std::replace(key.begin(), key.end(), '-', '_');
                    pflags[key] = pvalues[flag];
                }
            return run_pipeline_cmd(g, config_file, pflags);
        };
    });

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic intent fixture");
    SyntheticConfig sc;
    std::string synth_out;
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--seed", sc.seed)->required();
    synth->add_option("--images", sc.images);
    synth->add_option("--classes", sc.classes);
    synth->add_option("--size", sc.size);
    synth->callback([&] {
        action = [&] {
            generate_synthetic(synth_out, sc);
            spdlog::info("wrote {} images and manifest.jsonl to {}", sc.images, synth_out);
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(spdlog::level::from_str(g.log_level));

    try {
        return action ? action() : 2;
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}

#pragma once

// Line-delimited JSON manifest. One record per line:
//
//   {"image_id": "a", "image_path": "img/a.png",
//    "bboxes": [{"x0": 2, "y0": 2, "w": 4, "h": 4, "class": "person"}],
//    "label_counts": {"Attractive": 2}, "annotator_total": 4,
//    "hashtags": ["#coffeeme"]}
//
// `hashtags` is optional. Blank lines are ignored. Relative image paths are
// resolved against the manifest's directory by resolve_image_path().

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cprobe/error.hpp"
#include "cprobe/raster.hpp"

namespace cprobe {

struct ManifestRecord {
    std::string image_id;
    std::string image_path;
    std::vector<LabeledBox> bboxes;
    std::map<std::string, int> label_counts;
    int annotator_total = 0;
    std::optional<std::vector<std::string>> hashtags;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(line, std::string("missing field '") + key + "'");
    return *it;
}

inline int require_int(const nlohmann::json& obj, const char* key, std::size_t line) {
    const auto& v = require(obj, key, line);
    if (!v.is_number_integer()) throw ParseError(line, std::string("field '") + key + "' must be an integer");
    return v.get<int>();
}

inline std::string require_string(const nlohmann::json& obj, const char* key, std::size_t line) {
    const auto& v = require(obj, key, line);
    if (!v.is_string()) throw ParseError(line, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

inline ManifestRecord parse_record(const std::string& text, std::size_t line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line, "record must be a JSON object");

    ManifestRecord r;
    r.image_id = require_string(j, "image_id", line);
    if (r.image_id.empty()) throw ParseError(line, "image_id must be non-empty");
    r.image_path = require_string(j, "image_path", line);

    const auto& boxes = require(j, "bboxes", line);
    if (!boxes.is_array()) throw ParseError(line, "field 'bboxes' must be an array");
    for (const auto& b : boxes) {
        if (!b.is_object()) throw ParseError(line, "bbox entries must be objects");
        LabeledBox lb;
        lb.box = BBox{require_int(b, "x0", line), require_int(b, "y0", line), require_int(b, "w", line),
                      require_int(b, "h", line)};
        lb.label = require_string(b, "class", line);
        if (lb.box.w < 1 || lb.box.h < 1)
            throw ValidationError("line " + std::to_string(line) + ": degenerate bbox (w and h must be >= 1)");
        if (lb.box.x0 + lb.box.w <= 0 || lb.box.y0 + lb.box.h <= 0)
            throw ValidationError("line " + std::to_string(line) + ": bbox lies entirely before the image origin");
        r.bboxes.push_back(std::move(lb));
    }

    const auto& counts = require(j, "label_counts", line);
    if (!counts.is_object()) throw ParseError(line, "field 'label_counts' must be an object");
    int max_count = 0;
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (!it.value().is_number_integer() || it.value().get<int>() < 0)
            throw ParseError(line, "label count for '" + it.key() + "' must be a non-negative integer");
        const int c = it.value().get<int>();
        r.label_counts[it.key()] = c;
        max_count = std::max(max_count, c);
    }

    r.annotator_total = require_int(j, "annotator_total", line);
    if (r.annotator_total < max_count)
        throw ValidationError("line " + std::to_string(line) + ": annotator_total " +
                              std::to_string(r.annotator_total) + " is below the largest label count " +
                              std::to_string(max_count));

    if (auto it = j.find("hashtags"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw ParseError(line, "field 'hashtags' must be an array");
        std::vector<std::string> tags;
        for (const auto& t : *it) {
            if (!t.is_string()) throw ParseError(line, "hashtags must be strings");
            tags.push_back(t.get<std::string>());
        }
        r.hashtags = std::move(tags);
    }
    return r;
}

}  // namespace detail

inline std::vector<ManifestRecord> parse_manifest_stream(std::istream& in) {
    std::vector<ManifestRecord> records;
    std::map<std::string, std::size_t> seen;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto rec = detail::parse_record(text, line);
        if (auto [it, fresh] = seen.emplace(rec.image_id, line); !fresh)
            throw ValidationError("line " + std::to_string(line) + ": duplicate image_id '" + rec.image_id +
                                  "' (first seen on line " + std::to_string(it->second) + ")");
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<ManifestRecord> parse_manifest_text(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest_stream(in);
}

inline std::vector<ManifestRecord> parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest " + path.string());
    return parse_manifest_stream(in);
}

inline std::string to_json_line(const ManifestRecord& r) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["image_path"] = r.image_path;
    auto boxes = nlohmann::ordered_json::array();
    for (const auto& b : r.bboxes)
        boxes.push_back({{"x0", b.box.x0}, {"y0", b.box.y0}, {"w", b.box.w}, {"h", b.box.h}, {"class", b.label}});
    j["bboxes"] = std::move(boxes);
    j["label_counts"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.label_counts) j["label_counts"][k] = v;
    j["annotator_total"] = r.annotator_total;
    if (r.hashtags) j["hashtags"] = *r.hashtags;
    return j.dump();
}

inline std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path,
                                                const ManifestRecord& r) {
    std::filesystem::path p(r.image_path);
    if (p.is_absolute()) return p;
    return manifest_path.parent_path() / p;
}

inline std::vector<BBox> boxes_of(const ManifestRecord& r) {
    std::vector<BBox> out;
    out.reserve(r.bboxes.size());
    for (const auto& b : r.bboxes) out.push_back(b.box);
    return out;
}

// Sorted union of every intent class named in label_counts across records.
inline std::vector<std::string> intent_classes(const std::vector<ManifestRecord>& records) {
    std::set<std::string> names;
    for (const auto& r : records)
        for (const auto& [k, v] : r.label_counts) names.insert(k);
    return {names.begin(), names.end()};
}

// Ground-truth label set: classes chosen by at least half of the annotators,
// falling back to the most-voted classes when no class reaches half.
inline std::vector<std::string> truth_labels(const ManifestRecord& r) {
    std::vector<std::string> out;
    for (const auto& [k, v] : r.label_counts)
        if (v > 0 && 2 * v >= r.annotator_total) out.push_back(k);
    if (!out.empty()) return out;
    int best = 0;
    for (const auto& [k, v] : r.label_counts) best = std::max(best, v);
    if (best == 0) return out;
    for (const auto& [k, v] : r.label_counts)
        if (v == best) out.push_back(k);
    return out;
}

}  // namespace cprobe

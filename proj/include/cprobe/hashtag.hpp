#pragma once

// Hashtag text pipeline: dictionary word-break, noise filtering, token
// embedding averaging, and concatenation with image features.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cprobe/error.hpp"

namespace cprobe {

class Dictionary {
public:
    Dictionary() = default;

    template <typename Range>
    explicit Dictionary(const Range& tokens) {
        for (const auto& t : tokens) add(std::string(t));
        if (words_.empty()) throw ValidationError("dictionary is empty");
    }
    Dictionary(std::initializer_list<std::string_view> tokens) : Dictionary(std::vector<std::string_view>(tokens)) {}

    bool contains(std::string_view token) const { return words_.count(std::string(token)) != 0; }
    std::size_t max_token_len() const noexcept { return max_len_; }
    std::size_t size() const noexcept { return words_.size(); }

private:
    void add(std::string token) {
        if (token.empty()) return;
        for (char c : token)
            if (c == '#' || std::isspace(static_cast<unsigned char>(c)))
                throw ValidationError("dictionary token '" + token + "' contains '#' or whitespace");
        std::transform(token.begin(), token.end(), token.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        max_len_ = std::max(max_len_, token.size());
        words_.insert(std::move(token));
    }

    std::unordered_set<std::string> words_;
    std::size_t max_len_ = 0;
};

// One token per line; blank lines and surrounding whitespace are ignored.
inline Dictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dictionary " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        tokens.push_back(line.substr(b, e - b + 1));
    }
    return Dictionary(tokens);
}

// Strips leading '#', lowercases; nullopt if anything but ASCII letters remain.
inline std::optional<std::string> normalize_hashtag(std::string_view raw) {
    std::size_t start = 0;
    while (start < raw.size() && raw[start] == '#') ++start;
    std::string out;
    out.reserve(raw.size() - start);
    for (std::size_t i = start; i < raw.size(); ++i) {
        const auto c = static_cast<unsigned char>(raw[i]);
        if (c >= 0x80 || !std::isalpha(c)) return std::nullopt;
        out += static_cast<char>(std::tolower(c));
    }
    if (out.empty()) return std::nullopt;
    return out;
}

// Segments a hashtag into dictionary tokens. Among all full covers the one
// with the fewest tokens wins; ties go to the cover whose first differing
// token is longer. nullopt when no cover exists.
inline std::optional<std::vector<std::string>> word_break(std::string_view hashtag, const Dictionary& dict) {
    const auto norm = normalize_hashtag(hashtag);
    if (!norm) return std::nullopt;
    const std::string& s = *norm;
    const std::size_t n = s.size();
    constexpr std::size_t none = static_cast<std::size_t>(-1);

    // Suffix DP: fewest[i] tokens cover s[i..n); next[i] is where the chosen
    // first token ends. Scanning j from the far end and only replacing on a
    // strict improvement keeps the longest first token among equal counts,
    // which is also the lexicographic tie-break over the whole cover.
    std::vector<std::size_t> fewest(n + 1, none), next(n + 1, none);
    fewest[n] = 0;
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t far = std::min(n, i + dict.max_token_len());
        for (std::size_t j = far; j > i; --j) {
            if (fewest[j] == none) continue;
            if (!dict.contains(std::string_view(s).substr(i, j - i))) continue;
            if (fewest[i] == none || fewest[j] + 1 < fewest[i]) {
                fewest[i] = fewest[j] + 1;
                next[i] = j;
            }
        }
    }
    if (fewest[0] == none) return std::nullopt;
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < n; i = next[i]) tokens.push_back(s.substr(i, next[i] - i));
    return tokens;
}

struct HashtagRecord {
    std::string raw;
    std::vector<std::string> tokens;
    friend bool operator==(const HashtagRecord&, const HashtagRecord&) = default;
};

// Normalizes, drops duplicates (first occurrence wins), and keeps only tags
// that segment into at most `max_tokens` dictionary tokens.
inline std::vector<HashtagRecord> filter_hashtags(std::span<const std::string> tags, const Dictionary& dict,
                                                  std::size_t max_tokens = 6) {
    std::vector<HashtagRecord> out;
    std::set<std::string> seen;
    for (const auto& raw : tags) {
        const auto norm = normalize_hashtag(raw);
        if (!norm || !seen.insert(*norm).second) continue;
        auto tokens = word_break(*norm, dict);
        if (!tokens || tokens->size() > max_tokens) continue;
        out.push_back({raw, std::move(*tokens)});
    }
    return out;
}

class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

    void add(std::string token, std::vector<float> vec) {
        if (vec.size() != dim_)
            throw ValidationError("embedding for '" + token + "' has " + std::to_string(vec.size()) +
                                  " values, expected " + std::to_string(dim_));
        for (float v : vec)
            if (!std::isfinite(v)) throw ValidationError("embedding for '" + token + "' is not finite");
        entries_[std::move(token)] = std::move(vec);
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<float>* find(const std::string& token) const {
        auto it = entries_.find(token);
        return it == entries_.end() ? nullptr : &it->second;
    }

private:
    std::size_t dim_;
    std::unordered_map<std::string, std::vector<float>> entries_;
};

// TSV with a `dim=<d>` header line, then `token<TAB>v1<TAB>...<TAB>vd`.
inline EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open embedding table " + path.string());
    std::string line;
    std::size_t lineno = 0;
    std::optional<EmbeddingTable> table;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!table) {
            if (line.rfind("dim=", 0) != 0) throw ParseError(lineno, "expected header 'dim=<d>'");
            try {
                table.emplace(static_cast<std::size_t>(std::stoul(line.substr(4))));
            } catch (const std::exception&) {
                throw ParseError(lineno, "bad dimension in header");
            }
            continue;
        }
        std::vector<std::string> fields;
        std::size_t pos = 0;
        for (;;) {
            const auto tab = line.find('\t', pos);
            fields.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fields.size() != table->dim() + 1)
            throw ParseError(lineno, "expected a token and " + std::to_string(table->dim()) + " values");
        std::vector<float> vec;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            try {
                std::size_t used = 0;
                vec.push_back(std::stof(fields[i], &used));
                if (used != fields[i].size()) throw std::invalid_argument(fields[i]);
            } catch (const std::exception&) {
                throw ParseError(lineno, "bad value '" + fields[i] + "'");
            }
        }
        try {
            table->add(fields[0], std::move(vec));
        } catch (const ValidationError& e) {
            throw ParseError(lineno, e.what());
        }
    }
    if (!table) throw ParseError(lineno, "empty embedding table");
    return std::move(*table);
}

// Mean of the tokens' vectors, skipping tokens absent from the table.
inline std::optional<std::vector<float>> embed_hashtag(std::span<const std::string> tokens,
                                                       const EmbeddingTable& table) {
    std::vector<double> acc(table.dim(), 0.0);
    std::size_t used = 0;
    for (const auto& t : tokens)
        if (const auto* v = table.find(t)) {
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*v)[i];
            ++used;
        }
    if (used == 0) return std::nullopt;
    std::vector<float> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(used));
    return out;
}

struct HashtagFeature {
    std::vector<float> vector;
    bool empty = false;  // no hashtag produced an embedding; vector is zero
};

inline HashtagFeature aggregate_image_hashtags(std::span<const HashtagRecord> records, const EmbeddingTable& table) {
    std::vector<double> acc(table.dim(), 0.0);
    std::size_t used = 0;
    for (const auto& r : records)
        if (auto v = embed_hashtag(r.tokens, table)) {
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*v)[i];
            ++used;
        }
    HashtagFeature f;
    f.vector.assign(table.dim(), 0.0f);
    f.empty = used == 0;
    if (!f.empty)
        for (std::size_t i = 0; i < acc.size(); ++i)
            f.vector[i] = static_cast<float>(acc[i] / static_cast<double>(used));
    return f;
}

inline std::vector<float> fuse(std::span<const float> image_feat, std::span<const float> hashtag_feat) {
    for (float v : image_feat)
        if (!std::isfinite(v)) throw ValidationError("fuse: image feature is not finite");
    for (float v : hashtag_feat)
        if (!std::isfinite(v)) throw ValidationError("fuse: hashtag feature is not finite");
    std::vector<float> out(image_feat.begin(), image_feat.end());
    out.insert(out.end(), hashtag_feat.begin(), hashtag_feat.end());
    return out;
}

}  // namespace cprobe

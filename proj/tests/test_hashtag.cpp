#include <functional>

#include <gtest/gtest.h>

#include "cprobe/hashtag.hpp"
#include "test_util.hpp"

using namespace cprobe;

namespace {

// Minimal token count of any full cover, by exhaustive enumeration of split points.
std::optional<std::size_t> brute_min_tokens(const std::string& s, const std::vector<std::string>& words) {
    std::optional<std::size_t> best;
    const std::set<std::string> dict(words.begin(), words.end());
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t used) {
        if (best && used >= *best) return;
        if (pos == s.size()) {
            best = used;
            return;
        }
        for (std::size_t end = pos + 1; end <= s.size(); ++end)
            if (dict.count(s.substr(pos, end - pos))) rec(end, used + 1);
    };
    rec(0, 0);
    return best;
}

}  // namespace

TEST(WordBreak, SplitsCoffeeMe) {
    const Dictionary d{"coffee", "me", "cof", "fee"};
    EXPECT_EQ(*word_break("coffeeme", d), (std::vector<std::string>{"coffee", "me"}));
}

TEST(WordBreak, FewestTokensWins) {
    const Dictionary d{"landscape", "photography", "land", "scape", "photo", "graphy"};
    EXPECT_EQ(*word_break("landscapephotography", d), (std::vector<std::string>{"landscape", "photography"}));
}

TEST(WordBreak, TiesPreferTheLongerEarliestToken) {
    const Dictionary d{"ab", "a", "bc", "c"};
    // "a"+"bc" and "ab"+"c" both use two tokens; the longer first token wins.
    EXPECT_EQ(*word_break("abc", d), (std::vector<std::string>{"ab", "c"}));
}

TEST(WordBreak, NoCoverIsRejected) {
    const Dictionary d{"the", "cat", "dog"};
    EXPECT_FALSE(word_break("xqzt", d));
    EXPECT_FALSE(word_break("thecats", d));
}

TEST(WordBreak, MatchesBruteForceOnRandomStrings) {
    Rng r(2024);
    const std::string alphabet = "abcde";
    std::vector<std::string> words;
    std::set<std::string> uniq;
    while (words.size() < 50) {
        std::string w;
        for (std::size_t n = 1 + r.below(5); n > 0; --n) w += alphabet[r.below(alphabet.size())];
        if (uniq.insert(w).second) words.push_back(w);
    }
    const Dictionary d(words);
    for (int t = 0; t < 500; ++t) {
        std::string s;
        for (std::size_t n = 1 + r.below(20); n > 0; --n) s += alphabet[r.below(alphabet.size())];
        const auto got = word_break(s, d);
        const auto best = brute_min_tokens(s, words);
        ASSERT_EQ(got.has_value(), best.has_value()) << s;
        if (!got) continue;
        EXPECT_EQ(got->size(), *best) << s;
        std::string joined;
        for (const auto& tok : *got) {
            EXPECT_TRUE(d.contains(tok));
            joined += tok;
        }
        EXPECT_EQ(joined, s);
    }
}

TEST(WordBreak, IndependentOfDictionaryOrder) {
    std::vector<std::string> words{"a", "ab", "abc", "b", "bc", "c", "cab", "ca"};
    const auto expect = word_break("abcabcab", Dictionary(words));
    Rng r(1);
    for (int t = 0; t < 10; ++t) {
        r.shuffle(std::span<std::string>(words));
        EXPECT_EQ(word_break("abcabcab", Dictionary(words)), expect);
    }
}

TEST(Normalize, StripsHashAndLowercases) {
    EXPECT_EQ(*normalize_hashtag("#CoffeeMe"), "coffeeme");
    EXPECT_EQ(*normalize_hashtag("travel"), "travel");
    EXPECT_FALSE(normalize_hashtag("\xe2\x98\x95me"));
    EXPECT_FALSE(normalize_hashtag("#no_way"));
    EXPECT_FALSE(normalize_hashtag("#"));
}

TEST(Dictionary, RejectsBadTokens) {
    EXPECT_THROW(Dictionary({"ok", "not ok"}), ValidationError);
    EXPECT_THROW(Dictionary({"#tag"}), ValidationError);
    EXPECT_THROW(Dictionary(std::vector<std::string>{}), ValidationError);
    const Dictionary d{"Hello"};
    EXPECT_TRUE(d.contains("hello"));
}

TEST(Filter, DeduplicatesAfterNormalization) {
    const Dictionary d{"coffee", "me"};
    const std::vector<std::string> tags{"#CoffeeMe", "coffeeme"};
    const auto out = filter_hashtags(tags, d);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].raw, "#CoffeeMe");
}

TEST(Filter, DropsNonLettersAndLongSegmentations) {
    const Dictionary d{"a", "b", "me"};
    const std::vector<std::string> tags{"\xe2\x98\x95me", "abababa", "ababab"};
    const auto out = filter_hashtags(tags, d);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].raw, "ababab");
    EXPECT_EQ(filter_hashtags(tags, d, 7).size(), 2u);
}

TEST(Embedding, MeansAndSkips) {
    EmbeddingTable t(2);
    t.add("x", {1, 0});
    t.add("y", {0, 1});
    const std::vector<std::string> one{"x"}, two{"x", "y"}, mixed{"x", "zzz"}, none{"zzz"};
    EXPECT_EQ(*embed_hashtag(one, t), (std::vector<float>{1, 0}));
    EXPECT_EQ(*embed_hashtag(two, t), (std::vector<float>{0.5f, 0.5f}));
    EXPECT_EQ(*embed_hashtag(mixed, t), (std::vector<float>{1, 0}));
    EXPECT_FALSE(embed_hashtag(none, t));
    EXPECT_THROW(t.add("bad", {1}), ValidationError);
}

TEST(Embedding, ImageAggregation) {
    EmbeddingTable t(2);
    t.add("p", {1, 1});
    t.add("q", {3, 3});
    const std::vector<HashtagRecord> recs{{"#p", {"p"}}, {"#q", {"q"}}};
    const auto f = aggregate_image_hashtags(recs, t);
    EXPECT_FALSE(f.empty);
    EXPECT_EQ(f.vector, (std::vector<float>{2, 2}));
    const auto e = aggregate_image_hashtags({}, t);
    EXPECT_TRUE(e.empty);
    EXPECT_EQ(e.vector, (std::vector<float>{0, 0}));
}

TEST(Embedding, PermutationInvariant) {
    EmbeddingTable t(3);
    Rng r(6);
    std::vector<std::string> toks;
    for (int i = 0; i < 6; ++i) {
        toks.push_back("t" + std::to_string(i));
        t.add(toks.back(), {static_cast<float>(r.below(8)), static_cast<float>(r.below(8)), static_cast<float>(r.below(8))});
    }
    const auto a = embed_hashtag(toks, t);
    r.shuffle(std::span<std::string>(toks));
    EXPECT_EQ(embed_hashtag(toks, t), a);
}

TEST(Fuse, ConcatenatesInOrder) {
    const std::vector<float> a{1, 2}, b{3};
    EXPECT_EQ(fuse(a, b), (std::vector<float>{1, 2, 3}));
    const std::vector<float> z(4, 0.0f);
    EXPECT_EQ(fuse(a, z).size(), 6u);
    const std::vector<float> nan{std::numeric_limits<float>::quiet_NaN()};
    EXPECT_THROW(fuse(a, nan), ValidationError);
}

TEST(Embedding, TableFileFormat) {
    const auto dir = testutil::scratch_dir();
    std::ofstream(dir / "e.tsv") << "dim=2\nsun\t0.5\t1\nsea\t-1\t2\n";
    const auto t = load_embedding_table(dir / "e.tsv");
    EXPECT_EQ(t.dim(), 2u);
    EXPECT_EQ(*t.find("sea"), (std::vector<float>{-1, 2}));
    std::ofstream(dir / "bad.tsv") << "dim=2\nsun\t0.5\n";
    try {
        load_embedding_table(dir / "bad.tsv");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

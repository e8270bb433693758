#include <cstring>
#include <fstream>
#include <set>

#include <gtest/gtest.h>
#include <png.h>

#include "cprobe/manifest.hpp"
#include "cprobe/png_io.hpp"
#include "cprobe/tensor.hpp"
#include "test_util.hpp"

using namespace cprobe;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs |= x != c.next();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, SplitmixReferenceValue) {
    // First output of splitmix64 seeded with 0 (published reference value).
    std::uint64_t s = 0;
    EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafULL);
}

TEST(Rng, Fnv1aReferenceValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
    Rng r(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = r.below(10);
        ASSERT_LT(v, 10u);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 10u);
}

TEST(Rng, UniformAndNormalMoments) {
    Rng r(9);
    double su = 0, sn = 0, sn2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
    Rng r(3);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    r.shuffle(std::span<int>(v));
    auto s = v;
    std::sort(s.begin(), s.end());
    for (int i = 0; i < 50; ++i) EXPECT_EQ(s[i], i);
    EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Raster, ShapeValidation) {
    EXPECT_THROW(RasterImage(0, 1, 3), ValidationError);
    EXPECT_THROW(RasterImage(1, 1, 2), ValidationError);
    EXPECT_THROW(RasterImage(2, 2, 1, std::vector<std::uint8_t>(3)), ValidationError);
    RasterImage img(3, 2, 3, 7);
    EXPECT_EQ(img.data().size(), 18u);
    img.at(2, 1, 2) = 99;
    EXPECT_EQ(img.data()[17], 99);
}

TEST(Raster, MaskComplementIsAnInvolution) {
    RegionMask m(5, 4, false);
    m.set(1, 2, true);
    m.set(4, 0, true);
    EXPECT_EQ(m.complement().complement(), m);
    EXPECT_EQ(m.complement().count(), 18u);
}

TEST(Raster, BoxesClampToTheFrame) {
    const BBox b{-3, 5, 10, 10};
    const auto r = b.clamped(8, 8);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->x0, 0);
    EXPECT_EQ(r->y0, 5);
    EXPECT_EQ(r->x1, 7);
    EXPECT_EQ(r->y1, 8);
    EXPECT_FALSE((BBox{20, 20, 2, 2}.clamped(8, 8)));
}

TEST(Tensor, ValuesFromShapeAndPayload) {
    Tensor t({2, 2}, {1, 2, 3, 4});
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_EQ(t.row(1)[0], 3.0f);
}

TEST(Tensor, PayloadLengthMismatchIsAFormatError) {
    EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), FormatError);
}

TEST(Tensor, NonFiniteValuesAreRejected) {
    EXPECT_THROW(Tensor({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()}), ValidationError);
    EXPECT_THROW(Tensor({1}, std::vector<float>{std::numeric_limits<float>::infinity()}), ValidationError);
    EXPECT_THROW(Tensor({3}, std::numeric_limits<float>::infinity()), ValidationError);
}

TEST(Tensor, RoundTripIsBitExact) {
    const auto dir = testutil::scratch_dir();
    Rng r(11);
    std::vector<float> v(1000);
    for (auto& x : v) x = static_cast<float>((r.uniform() - 0.5) * 1e6 * r.uniform());
    Tensor t({10, 100}, v);
    write_tensor(t, dir / "t.f32");
    const auto back = read_tensor(dir / "t.f32");
    ASSERT_EQ(back.shape(), t.shape());
    EXPECT_EQ(std::memcmp(back.data().data(), t.data().data(), 4000), 0);

    std::ifstream side(dir / "t.f32.shape");
    std::string text;
    std::getline(side, text);
    EXPECT_EQ(text, "10x100");
}

TEST(Tensor, PayloadIsLittleEndianF32) {
    const auto dir = testutil::scratch_dir();
    write_tensor(Tensor({1}, {1.0f}), dir / "one.f32");
    std::ifstream in(dir / "one.f32", std::ios::binary);
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    EXPECT_EQ(b[0], 0x00);
    EXPECT_EQ(b[1], 0x00);
    EXPECT_EQ(b[2], 0x80);
    EXPECT_EQ(b[3], 0x3f);
}

TEST(Tensor, TruncatedPayloadIsAFormatError) {
    const auto dir = testutil::scratch_dir();
    write_tensor(Tensor({2, 2}, {1, 2, 3, 4}), dir / "t.f32");
    std::ofstream(dir / "t.f32.shape") << "2x3";
    EXPECT_THROW(read_tensor(dir / "t.f32"), FormatError);
}

TEST(Png, KnownPixelsDecode) {
    const auto dir = testutil::scratch_dir();
    // Write with libpng directly so the decoder is checked against an independent encoder call.
    const std::uint8_t px[12] = {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = 2;
    image.height = 2;
    image.format = PNG_FORMAT_RGB;
    ASSERT_TRUE(png_image_write_to_file(&image, (dir / "k.png").c_str(), 0, px, 0, nullptr));
    const auto img = read_raster(dir / "k.png");
    ASSERT_EQ(img.width(), 2);
    ASSERT_EQ(img.channels(), 3);
    EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), px));
}

TEST(Png, RoundTripIsBitExact) {
    const auto dir = testutil::scratch_dir();
    for (int c : {1, 3}) {
        const auto img = testutil::random_image(17, 9, c, 5 + c);
        write_raster(img, dir / "r.png");
        EXPECT_EQ(read_raster(dir / "r.png"), img);
    }
}

TEST(Png, SixteenBitIsAFormatError) {
    const auto dir = testutil::scratch_dir();
    const std::uint16_t px[4] = {0, 1000, 40000, 65535};
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = 2;
    image.height = 2;
    image.format = PNG_FORMAT_LINEAR_Y;
    ASSERT_TRUE(png_image_write_to_file(&image, (dir / "16.png").c_str(), 0, px, 0, nullptr));
    EXPECT_THROW(read_raster(dir / "16.png"), FormatError);
}

TEST(Png, AlphaIsAFormatError) {
    const auto dir = testutil::scratch_dir();
    const std::uint8_t px[8] = {1, 2, 3, 255, 4, 5, 6, 128};
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = 2;
    image.height = 1;
    image.format = PNG_FORMAT_RGBA;
    ASSERT_TRUE(png_image_write_to_file(&image, (dir / "a.png").c_str(), 0, px, 0, nullptr));
    EXPECT_THROW(read_raster(dir / "a.png"), FormatError);
}

TEST(Manifest, OneRecordMapsFields) {
    const auto recs = parse_manifest_text(
        R"({"image_id":"a","image_path":"a.png","bboxes":[{"x0":1,"y0":2,"w":3,"h":4,"class":"person"}],)"
        R"("label_counts":{"Attractive":2},"annotator_total":4})");
    ASSERT_EQ(recs.size(), 1u);
    const auto& r = recs[0];
    EXPECT_EQ(r.image_id, "a");
    ASSERT_EQ(r.bboxes.size(), 1u);
    EXPECT_EQ(r.bboxes[0].box.x0, 1);
    EXPECT_EQ(r.bboxes[0].box.h, 4);
    EXPECT_EQ(r.bboxes[0].label, "person");
    EXPECT_EQ(r.label_counts.at("Attractive"), 2);
    EXPECT_EQ(r.annotator_total, 4);
    EXPECT_FALSE(r.hashtags);
}

TEST(Manifest, EmptyInputGivesNoRecords) { EXPECT_TRUE(parse_manifest_text("").empty()); }

TEST(Manifest, MissingFieldNamesTheLine) {
    const std::string good = R"({"image_id":"a","image_path":"a.png","bboxes":[],"label_counts":{"x":1},"annotator_total":1})";
    const std::string bad = R"({"image_id":"b","image_path":"b.png","bboxes":[],"label_counts":{"x":1}})";
    try {
        parse_manifest_text(good + "\n" + bad + "\n");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("annotator_total"), std::string::npos);
    }
}

TEST(Manifest, MalformedJsonIsLocated) {
    try {
        parse_manifest_text("{not json}\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
    }
}

TEST(Manifest, DuplicateIdIsAValidationError) {
    const std::string rec = R"({"image_id":"a","image_path":"a.png","bboxes":[],"label_counts":{"x":1},"annotator_total":1})";
    EXPECT_THROW(parse_manifest_text(rec + "\n" + rec), ValidationError);
}

TEST(Manifest, DegenerateBoxIsAValidationError) {
    EXPECT_THROW(parse_manifest_text(R"({"image_id":"a","image_path":"a.png","bboxes":[{"x0":0,"y0":0,"w":0,"h":3,"class":"c"}],"label_counts":{"x":1},"annotator_total":1})"),
                 ValidationError);
}

TEST(Manifest, TotalBelowLargestCountIsAValidationError) {
    EXPECT_THROW(parse_manifest_text(R"({"image_id":"a","image_path":"a.png","bboxes":[],"label_counts":{"x":3},"annotator_total":2})"),
                 ValidationError);
}

TEST(Manifest, SerializedRecordsParseBack) {
    ManifestRecord r;
    r.image_id = "img,1";
    r.image_path = "sub/img.png";
    r.bboxes.push_back({BBox{1, 2, 3, 4}, "dog"});
    r.label_counts = {{"A", 2}, {"B", 1}};
    r.annotator_total = 3;
    r.hashtags = std::vector<std::string>{"#sun", "#beach"};
    const auto back = parse_manifest_text(to_json_line(r));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].image_id, r.image_id);
    EXPECT_EQ(back[0].label_counts, r.label_counts);
    EXPECT_EQ(*back[0].hashtags, *r.hashtags);
}

TEST(Manifest, TruthLabelsUseTheMajorityRule) {
    ManifestRecord r;
    r.annotator_total = 4;
    r.label_counts = {{"A", 2}, {"B", 1}, {"C", 1}};
    EXPECT_EQ(truth_labels(r), std::vector<std::string>{"A"});
    r.label_counts = {{"A", 1}, {"B", 1}, {"C", 0}};
    EXPECT_EQ(truth_labels(r), (std::vector<std::string>{"A", "B"}));
}

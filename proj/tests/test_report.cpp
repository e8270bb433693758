#include <gtest/gtest.h>

#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "cprobe/report.hpp"

using namespace cprobe;
namespace pt = boost::property_tree;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

pt::ptree parse(const std::string& svg) {
    std::istringstream in(svg);
    pt::ptree tree;
    pt::read_xml(in, tree);
    return tree;
}

CorrelationMatrix two_by_two() {
    CorrelationMatrix mx;
    mx.pano_classes = {"sky", "tree"};
    mx.intent_classes = {"happy", "calm"};
    mx.values = {0.25, std::nullopt, 1.0, 0.0};
    mx.support = {3, 0, 1, 2};
    return mx;
}

}  // namespace

TEST(Bars, OneRectPerValue) {
    const BarSeries s{"object", {"x=0", "x=1", "x=2"}, {0.2, 0.5, 0.9}, {0.01, 0.0, 0.05}, 0.3};
    const auto svg = render_bars({s});
    EXPECT_EQ(count(svg, "class=\"bar\""), 3u);
    EXPECT_EQ(count(svg, "class=\"errorbar\""), 2u);
    EXPECT_EQ(count(svg, "class=\"baseline\""), 1u);
    EXPECT_NO_THROW(parse(svg));
}

TEST(Bars, SingleBarSingleSeries) {
    const auto svg = render_bars({BarSeries{"s", {"a"}, {0.5}, {0.0}, std::nullopt}});
    EXPECT_EQ(count(svg, "class=\"bar\""), 1u);
    EXPECT_EQ(count(svg, "class=\"baseline\""), 0u);
}

TEST(Bars, ByteIdenticalAcrossCalls) {
    const std::vector<BarSeries> s{{"object", {"x=0", "x=1"}, {0.1, 0.2}, {0.01, 0.02}, 0.25},
                                   {"context", {"x=0", "x=1"}, {0.3, 0.4}, {0.0, 0.1}, 0.25}};
    EXPECT_EQ(render_bars(s), render_bars(s));
}

TEST(Bars, EscapesNamesAndStaysWellFormed) {
    const auto svg = render_bars({BarSeries{"a<b & \"c\"", {"<x>"}, {0.5}, {0.1}, std::nullopt}});
    const auto tree = parse(svg);
    EXPECT_EQ(tree.get<std::string>("svg.g.<xmlattr>.class"), "axis");
    EXPECT_NE(svg.find("a&lt;b &amp; &quot;c&quot;"), std::string::npos);
}

TEST(Bars, ValuesOutsideUnitRangeAreClamped) {
    const auto svg = render_bars({BarSeries{"s", {"a", "b"}, {1.7, -0.3}, {0.0, 0.0}, std::nullopt}});
    EXPECT_NE(svg.find("height=\"240.00\" fill"), std::string::npos);
    EXPECT_NE(svg.find("height=\"0.00\" fill"), std::string::npos);
}

TEST(Bars, Rejections) {
    EXPECT_THROW(render_bars({}), ValidationError);
    EXPECT_THROW(render_bars({BarSeries{"s", {"a", "b"}, {0.5}, {0.0}, std::nullopt}}), ValidationError);
    EXPECT_THROW(render_bars({BarSeries{"s", {"a"}, {0.5}, {-0.1}, std::nullopt}}), ValidationError);
}

TEST(HeatGrid, AbsentCellsAreHatched) {
    const auto svg = render_heatgrid(two_by_two());
    EXPECT_EQ(count(svg, "class=\"cell\""), 3u);
    EXPECT_EQ(count(svg, "class=\"cell absent\""), 1u);
    EXPECT_EQ(count(svg, "url(#hatch)"), 1u);
    EXPECT_NO_THROW(parse(svg));
}

TEST(HeatGrid, RampEndpoints) {
    EXPECT_EQ(ramp_color(0.0), "#ffffff");
    EXPECT_EQ(ramp_color(1.0), "#08306b");
    EXPECT_EQ(ramp_color(2.0), "#08306b");
    CorrelationMatrix one;
    one.pano_classes = {"p"};
    one.intent_classes = {"m"};
    one.values = {1.0};
    one.support = {1};
    EXPECT_NE(render_heatgrid(one).find("fill=\"#08306b\""), std::string::npos);
}

TEST(HeatGrid, DeterministicAndRejectsEmpty) {
    EXPECT_EQ(render_heatgrid(two_by_two()), render_heatgrid(two_by_two()));
    EXPECT_THROW(render_heatgrid(CorrelationMatrix{}), ValidationError);
}

#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "vpagent/error.hpp"
#include "vpagent/vp_render.hpp"

using namespace vpa;

namespace {

std::set<Point> changed_pixels(const Image& before, const Image& after) {
  std::set<Point> out;
  for (int y = 0; y < before.height(); ++y) {
    for (int x = 0; x < before.width(); ++x) {
      if (!(before.at(x, y) == after.at(x, y))) out.insert({x, y});
    }
  }
  return out;
}

RenderStyle thin() {
  auto s = test::render_fixture_style();
  s.stroke_px = 1;
  return s;
}

}  // namespace

TEST(VpRender, GoldenRasters) {
  const auto frame = test::render_fixture_frame();
  const auto mask = test::render_fixture_mask();
  for (auto vp : kAllVpTypes) {
    const auto img = render_prompt(frame, mask, vp, test::render_fixture_style(), 3);
    const auto path = test::golden_vp_path(vp);
    if (test::update_goldens()) {
      fs::create_directories(path.parent_path());
      write_image(path, img);
      continue;
    }
    ASSERT_TRUE(fs::exists(path)) << path;
    EXPECT_EQ(read_image(path), img) << to_string(vp);
  }
}

TEST(VpRender, EveryTypeDrawsSomethingInStyleColour) {
  const auto frame = test::render_fixture_frame();
  const auto mask = test::render_fixture_mask();
  const auto style = test::render_fixture_style();
  for (auto vp : kAllVpTypes) {
    const auto img = render_prompt(frame, mask, vp, style, 1);
    EXPECT_EQ(img.size(), frame.size());
    const auto diff = changed_pixels(frame, img);
    EXPECT_FALSE(diff.empty()) << to_string(vp);
    long long coloured = 0;
    for (const auto& p : diff) coloured += img.at(p.x, p.y) == style.color;
    EXPECT_GT(coloured, 0) << to_string(vp);
    EXPECT_EQ(render_prompt(frame, mask, vp, style, 1), img) << to_string(vp);
  }
}

TEST(VpRender, ThinRectangleIsExactlyTheBoxPerimeter) {
  const auto frame = test::render_fixture_frame();
  const auto mask = test::render_fixture_mask();
  const auto img = render_prompt(frame, mask, VpType::rectangle, thin());
  std::set<Point> want;
  for (int x = 20; x <= 30; ++x) want.insert({x, 16}), want.insert({x, 24});
  for (int y = 16; y <= 24; ++y) want.insert({20, y}), want.insert({30, y});
  EXPECT_EQ(changed_pixels(frame, img), want);
}

TEST(VpRender, ThinContourCoversEveryComponentBorder) {
  const auto frame = test::render_fixture_frame();
  const auto mask = test::render_fixture_mask();
  const auto img = render_prompt(frame, mask, VpType::mask_contour, thin());
  const auto diff = changed_pixels(frame, img);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const bool border = mask.at(x, y) && (!mask.get(x - 1, y) || !mask.get(x + 1, y) || !mask.get(x, y - 1) ||
                                            !mask.get(x, y + 1));
      if (border) EXPECT_TRUE(diff.count({x, y})) << x << "," << y;
      if (!mask.at(x, y)) EXPECT_FALSE(diff.count({x, y})) << x << "," << y;
    }
  }
  EXPECT_TRUE(diff.count({50, 36}));
}

TEST(VpRender, EllipseTouchesBoxExtremes) {
  const auto frame = test::render_fixture_frame();
  const auto img = render_prompt(frame, test::render_fixture_mask(), VpType::ellipse, thin());
  for (Point p : {Point{20, 20}, Point{30, 20}, Point{25, 16}, Point{25, 24}}) {
    EXPECT_EQ(img.at(p.x, p.y), (Rgb{255, 0, 0})) << p.x << "," << p.y;
  }
  EXPECT_EQ(img.at(25, 20), frame.at(25, 20));
}

TEST(VpRender, PointCoversCentroidOfLargestComponent) {
  const auto frame = test::render_fixture_frame();
  const auto mask = test::render_fixture_mask();
  const auto c = mask_centroid(largest_component(mask));
  const auto img = render_prompt(frame, mask, VpType::point, test::render_fixture_style());
  EXPECT_EQ(img.at(static_cast<int>(std::lround(c.x)), static_cast<int>(std::lround(c.y))), (Rgb{255, 0, 0}));
  EXPECT_EQ(img.at(51, 37), frame.at(51, 37));
}

TEST(VpRender, ScribbleStaysInsideTargetAndFollowsSeed) {
  const auto mask = test::render_fixture_mask();
  const auto target = largest_component(mask);
  auto style = test::render_fixture_style();
  const auto path = scribble_path(mask, style);
  EXPECT_GE(path.size(), 2u);
  for (const auto& p : path) EXPECT_TRUE(target.get(p.x, p.y)) << p.x << "," << p.y;
  EXPECT_EQ(scribble_path(mask, style), path);
  bool differs = false;
  for (std::uint64_t seed = 0; seed < 8 && !differs; ++seed) {
    style.seed = seed + 1000;
    differs = scribble_path(mask, style) != path;
  }
  EXPECT_TRUE(differs);
}

TEST(VpRender, InputErrors) {
  const auto frame = test::render_fixture_frame();
  try {
    render_prompt(frame, Mask(10, 10), VpType::rectangle);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  try {
    render_prompt(frame, Mask(64, 48), VpType::arrow);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
  RenderStyle bad;
  bad.stroke_px = 0;
  EXPECT_THROW(render_prompt(frame, test::render_fixture_mask(), VpType::rectangle, bad), Error);
}

TEST(VpPhrase, SubstitutionRules) {
  EXPECT_EQ(substitute_vp("What colour is <vp>?", VpType::rectangle, 1),
            "What colour is the target in the highlighted box?");
  EXPECT_EQ(substitute_vp("Where does <vp> go?", VpType::set_of_mark, 4),
            "Where does the target marked with number 4 go?");
  try {
    substitute_vp("No token here", VpType::arrow, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingPlaceholder);
  }
  try {
    substitute_vp("<vp> and <vp>", VpType::arrow, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MultiplePlaceholders);
  }
  EXPECT_EQ(substitute_vp_all("A. <vp> moves; B. <vp> stays", VpType::point, 1),
            "A. the target marked by the point moves; B. the target marked by the point stays");
  EXPECT_EQ(substitute_vp_all("plain", VpType::point, 1), "plain");
  std::set<std::string> phrases;
  for (auto vp : kAllVpTypes) {
    phrases.insert(vp_phrase(vp, 1));
    EXPECT_EQ(parse_vp_type(to_string(vp)), vp);
    EXPECT_EQ(count_vp_tokens(vp_phrase(vp, 1)), 0u);
  }
  EXPECT_EQ(phrases.size(), kAllVpTypes.size());
  EXPECT_FALSE(parse_vp_type("hexagon"));
}

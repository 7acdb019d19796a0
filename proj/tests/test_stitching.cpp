#include <gtest/gtest.h>

#include <sstream>

#include "feedreg/stitching.hpp"
#include "feedreg/synthetic.hpp"

using namespace feedreg;

namespace {

Homography shift(double dx, double dy) { return TranslationModel{dx, dy}.to_homography(); }

}  // namespace

TEST(Chain, PrefixProducts) {
  const auto chain = accumulate_to_frame0({shift(10, 0), shift(5, 2), shift(-1, 1)});
  ASSERT_EQ(chain.size(), 4u);
  EXPECT_EQ(chain[0].max_abs_difference(Homography::identity()), 0.0);
  const Point2 p = apply(chain[3], {0, 0});
  EXPECT_DOUBLE_EQ(p.x, 14.0);
  EXPECT_DOUBLE_EQ(p.y, 3.0);
}

TEST(Canvas, BoundsFromWarpedCorners) {
  const PanoramaCanvas c = make_canvas({{100, 50}, {100, 50}}, {Homography::identity(), shift(30.5, -10)});
  EXPECT_EQ(c.origin_x, 0);
  EXPECT_EQ(c.origin_y, -10);
  EXPECT_EQ(c.width, 131);  // 0 .. 129.5 expanded to 130
  EXPECT_EQ(c.height, 60);
}

TEST(Stitch, SingleImageIsIdentity) {
  GrayImage img(13, 9);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 13; ++x) img.at(x, y) = (x * 7 + y * 3) % 11 / 10.0;
  }
  const Panorama p = stitch({img}, {});
  EXPECT_EQ(p.origin_x, 0);
  EXPECT_EQ(p.origin_y, 0);
  EXPECT_TRUE(p.image == img);
}

TEST(Stitch, IntegerShiftReassemblesScene) {
  GridSpec g = GridSpec::for_shape(PatternShape::Circle);
  g.frames = 3;
  g.motion = {60.0, 0.0};
  const Sequence seq = generate_sequence(g, DistortionSpec{}, NoiseSpec::none());
  const Panorama p = stitch(seq.images, {shift(60, 0), shift(60, 0)});
  EXPECT_EQ(p.image.width(), 520);
  EXPECT_EQ(p.image.height(), 400);
  for (int y = 0; y < 400; y += 7) {
    for (int x = 0; x < 400; x += 5) EXPECT_NEAR(p.image.at(x + 120, y), seq.images[2].at(x, y), 1e-12);
  }
  const GhostingReport gh = ghosting(seq.images, {shift(60, 0), shift(60, 0)});
  EXPECT_NEAR(gh.overall, 0.0, 1e-12);
  ASSERT_EQ(gh.per_pair.size(), 2u);
  EXPECT_EQ(gh.per_pair[0].pixels, 340u * 400u);
}

TEST(Stitch, FeatherBlendAgreesOnConsistentFrames) {
  GridSpec g = GridSpec::for_shape(PatternShape::Square);
  g.frames = 2;
  g.motion = {40.0, 20.0};
  const Sequence seq = generate_sequence(g, DistortionSpec{}, NoiseSpec::none());
  const Panorama a = stitch(seq.images, {shift(40, 20)}, BlendMode::Average);
  const Panorama f = stitch(seq.images, {shift(40, 20)}, BlendMode::Feather);
  ASSERT_EQ(a.image.width(), f.image.width());
  for (std::size_t i = 0; i < a.image.pixels().size(); ++i) {
    EXPECT_NEAR(a.image.pixels()[i], f.image.pixels()[i], 1e-12);
  }
}

TEST(Stitch, WeightsPositiveWhereCovered) {
  GrayImage img(20, 20, 0.5);
  const auto chain = accumulate_to_frame0({Homography(Eigen::Matrix3d{{1.1, 0.1, 5}, {-0.05, 0.95, 3}, {0, 0, 1}})});
  PanoramaCanvas c = make_canvas({{20, 20}, {20, 20}}, chain);
  warp(img, chain[0], c);
  warp(img, chain[1], c);
  const GrayImage r = c.resolve();
  for (int y = 0; y < c.height; ++y) {
    for (int x = 0; x < c.width; ++x) {
      const std::size_t i = c.index(x, y);
      if (c.weight[i] > 0.0) EXPECT_NEAR(r.at(x, y), 0.5, 1e-12);
    }
  }
}

TEST(Ghosting, GrowsWithTranslationError) {
  GridSpec g = GridSpec::for_shape(PatternShape::Circle);
  g.frames = 4;
  const Sequence seq = generate_sequence(g, DistortionSpec{0.5, 2}, NoiseSpec{});
  double last = -1.0;
  for (double e : {0.0, 1.0, 3.0, 8.0}) {
    const std::vector<Homography> hs(3, shift(60 + e, 60 - e));
    const double v = ghosting(seq.images, hs).overall;
    EXPECT_GE(v, last);
    last = v;
  }
}

TEST(Ghosting, InvalidInput) {
  EXPECT_THROW(ghosting({GrayImage(4, 4)}, {shift(1, 0)}), Error);
  EXPECT_THROW(stitch({}, {}), Error);
}

TEST(Ghosting, CsvLayout) {
  GhostingReport g;
  g.per_pair.push_back({0.125, 40});
  std::stringstream s;
  write_ghosting(s, g);
  EXPECT_EQ(s.str(), "pair,overlap_pixels,mean_abs_diff\n1,40,0.125\n");
}

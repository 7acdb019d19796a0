#include <gtest/gtest.h>

#include <sstream>

#include "feedreg/features.hpp"
#include "feedreg/synthetic.hpp"

using namespace feedreg;

namespace {

// Dark discs of radius 10 on a light background.
GrayImage discs(int w, int h, const std::vector<Point2>& centers) {
  GrayImage img(w, h, 0.9);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const auto& c : centers) {
        if (std::hypot(x - c.x, y - c.y) <= 10.0) img.at(x, y) = 0.1;
      }
    }
  }
  return img;
}

GrayImage checker(int w, int h, int cell) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = ((x / cell + y / cell) % 2) ? 0.9 : 0.1;
  }
  return img;
}

}  // namespace

TEST(Extract, ImageTooSmall) {
  try {
    extract(GrayImage(10, 10, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ImageTooSmall);
  }
}

TEST(Extract, FlatImageHasNoFeatures) {
  EXPECT_TRUE(extract(GrayImage(64, 64, 0.5)).empty());
  EXPECT_TRUE(extract(GrayImage(120, 120, 0.5), blob_extractor_config()).empty());
}

TEST(Extract, HarrisFindsCheckerCorners) {
  const FeatureSet fs = extract(checker(96, 96, 16));
  ASSERT_FALSE(fs.empty());
  for (const auto& p : fs.positions) {
    // Every corner lies on the lattice of cell boundaries.
    const double gx = std::abs(p.x - 16.0 * std::round(p.x / 16.0));
    const double gy = std::abs(p.y - 16.0 * std::round(p.y / 16.0));
    EXPECT_LE(gx, 1.5);
    EXPECT_LE(gy, 1.5);
  }
}

TEST(Extract, DescriptorsUnitNorm) {
  for (const auto& cfg : {ExtractorConfig{}, blob_extractor_config()}) {
    const FeatureSet fs = extract(checker(128, 128, 16), cfg);
    ASSERT_EQ(static_cast<std::size_t>(fs.descriptors.rows()), fs.size());
    EXPECT_EQ(fs.dim(), 256);
    for (Eigen::Index i = 0; i < fs.descriptors.rows(); ++i) {
      EXPECT_NEAR(fs.descriptors.row(i).norm(), 1.0, 1e-9);
    }
  }
}

TEST(Extract, BlobFindsDiscCenters) {
  const std::vector<Point2> centers = {{50.0, 50.0}, {110.0, 50.0}, {50.0, 110.0}, {110.5, 110.5}};
  const FeatureSet fs = extract(discs(160, 160, centers), blob_extractor_config());
  ASSERT_EQ(fs.size(), centers.size());
  for (const auto& c : centers) {
    double best = 1e9;
    for (const auto& p : fs.positions) best = std::min(best, distance(p, c));
    EXPECT_LT(best, 0.75);
  }
}

TEST(Extract, BlobPolarity) {
  ExtractorConfig cfg = blob_extractor_config();
  GrayImage img = discs(120, 120, {{60.0, 60.0}});
  EXPECT_EQ(extract(img, cfg).size(), 1u);
  for (auto& v : img.pixels()) v = 1.0 - v;  // light disc on dark ground
  EXPECT_EQ(extract(img, cfg).size(), 0u);
  cfg.blob_polarity = 0;
  EXPECT_EQ(extract(img, cfg).size(), 1u);
}

TEST(Extract, Deterministic) {
  GridSpec g = GridSpec::for_shape(PatternShape::Circle);
  const Frame f = generate_frame(g, DistortionSpec{1.0, 4}, NoiseSpec{}, 0);
  const FeatureSet a = extract(f.image, blob_extractor_config());
  const FeatureSet b = extract(f.image, blob_extractor_config());
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.descriptors, b.descriptors);
}

TEST(Extract, ShiftedImageGivesShiftedKeypoints) {
  const GrayImage a = discs(200, 160, {{60.0, 60.0}, {120.0, 90.0}});
  const GrayImage b = discs(200, 160, {{67.0, 63.0}, {127.0, 93.0}});
  const FeatureSet fa = extract(a, blob_extractor_config());
  const FeatureSet fb = extract(b, blob_extractor_config());
  ASSERT_EQ(fa.size(), 2u);
  ASSERT_EQ(fb.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(fb.positions[i].x - fa.positions[i].x, 7.0, 1e-6);
    EXPECT_NEAR(fb.positions[i].y - fa.positions[i].y, 3.0, 1e-6);
    EXPECT_LT((fa.descriptors.row(i) - fb.descriptors.row(i)).norm(), 1e-6);
  }
}

TEST(Extract, InvalidConfig) {
  ExtractorConfig cfg;
  cfg.descriptor_dim = 100;
  EXPECT_THROW(extract(checker(64, 64, 8), cfg), Error);
  cfg = blob_extractor_config();
  cfg.blob_sigmas = {4.0, 8.0};
  EXPECT_THROW(extract(checker(64, 64, 8), cfg), Error);
}

TEST(Features, PrecomputedNormsMatch) {
  const FeatureSet fs = extract(checker(96, 96, 16));
  const Eigen::VectorXd n = descriptor_distance_pre(fs);
  for (Eigen::Index i = 0; i < n.size(); ++i) EXPECT_NEAR(n(i), fs.descriptors.row(i).squaredNorm(), 1e-12);
}

TEST(Features, SerializationRoundTrip) {
  const FeatureSet fs = extract(checker(96, 96, 16));
  std::stringstream s;
  write_features(s, fs);
  const FeatureSet r = read_features(s);
  ASSERT_EQ(r.size(), fs.size());
  EXPECT_EQ(r.descriptors, fs.descriptors);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    EXPECT_EQ(r.positions[i].x, fs.positions[i].x);
    EXPECT_EQ(r.positions[i].y, fs.positions[i].y);
  }
}

#pragma once

// Ground-truthed grid-pattern sequences for registration benchmarks.
//
// A frame shows a window of an infinite lattice of dark patterns on a light
// background. The window advances by `motion` per frame, so a lattice cell at
// p in frame k appears at p + motion in frame k - 1 coordinates. Each cell
// receives an independent random local affine deformation per frame whose
// ranges scale linearly with the distortion factor; noise is photometric
// only and never changes the ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "feedreg/error.hpp"
#include "feedreg/features.hpp"
#include "feedreg/filters.hpp"
#include "feedreg/geometry.hpp"
#include "feedreg/image.hpp"

namespace feedreg {

enum class PatternShape { Square, Circle, Hexagon };

inline std::string to_string(PatternShape s) {
  switch (s) {
    case PatternShape::Square: return "square";
    case PatternShape::Circle: return "circle";
    case PatternShape::Hexagon: return "hexagon";
  }
  return "square";
}

inline PatternShape parse_shape(const std::string& s) {
  if (s == "square") return PatternShape::Square;
  if (s == "circle") return PatternShape::Circle;
  if (s == "hexagon") return PatternShape::Hexagon;
  throw Error(ErrorCode::SpecInvalid, "shape: unknown pattern '" + s + "'");
}

struct GridSpec {
  PatternShape shape = PatternShape::Square;
  double cell_param = 41.0;  ///< square side, or circle/hexagon radius
  double pitch = 60.0;       ///< lattice spacing
  int width = 400;
  int height = 400;
  int frames = 20;
  TranslationModel motion{60.0, 60.0};

  /// Paper-default cell size for a shape: 41 px squares, radius-20 circles and hexagons.
  static GridSpec for_shape(PatternShape s) {
    GridSpec g;
    g.shape = s;
    g.cell_param = s == PatternShape::Square ? 41.0 : 20.0;
    return g;
  }

  /// Radius of the smallest disc around the center containing the pattern.
  double extent() const { return shape == PatternShape::Square ? cell_param / std::sqrt(2.0) : cell_param; }

  void validate() const {
    if (!(cell_param > 0.0)) throw Error(ErrorCode::SpecInvalid, "cell_param: must be > 0");
    const double span = shape == PatternShape::Square ? cell_param : 2.0 * cell_param;
    if (!(pitch > span)) throw Error(ErrorCode::SpecInvalid, "pitch: must exceed the pattern extent");
    if (width < 1 || height < 1) throw Error(ErrorCode::SpecInvalid, "image_size: must be positive");
    if (frames < 2) throw Error(ErrorCode::SpecInvalid, "frames: must be >= 2");
    if (!std::isfinite(motion.dx) || !std::isfinite(motion.dy)) {
      throw Error(ErrorCode::SpecInvalid, "motion: must be finite");
    }
  }
};

/// Per-unit-factor ranges of the local affine deformation.
struct AffineRanges {
  double translation = 2.0;  ///< +/- pixels per axis
  double rotation_deg = 5.0;  ///< +/- degrees
  double scale = 0.05;        ///< scale in [1 - s, 1 + s] per axis
  double shear = 0.05;        ///< +/- shear coefficient
};

struct DistortionSpec {
  double factor = 0.0;
  std::uint64_t seed = 1;
  AffineRanges ranges{};

  /// Largest per-axis displacement of a deformed center from its nominal position.
  double max_center_offset() const { return ranges.translation * factor; }

  void validate() const {
    if (!(factor >= 0.0) || !std::isfinite(factor)) {
      throw Error(ErrorCode::SpecInvalid, "factor: must be finite and >= 0");
    }
  }
};

struct NoiseSpec {
  int gaussian_blur_mask = 7;
  double sp_density = 0.05;
  double awgn_variance = 0.02;
  std::uint64_t seed = 2;

  static NoiseSpec none() { return {1, 0.0, 0.0, 2}; }

  /// The mask is taken to span +/- 3 sigma.
  double blur_sigma() const { return gaussian_blur_mask / 6.0; }

  void validate() const {
    if (gaussian_blur_mask < 1 || gaussian_blur_mask % 2 == 0) {
      throw Error(ErrorCode::SpecInvalid, "gaussian_blur_mask: must be odd and >= 1");
    }
    if (!(sp_density >= 0.0 && sp_density <= 1.0)) {
      throw Error(ErrorCode::SpecInvalid, "sp_density: must lie in [0, 1]");
    }
    if (!(awgn_variance >= 0.0)) throw Error(ErrorCode::SpecInvalid, "awgn_variance: must be >= 0");
  }
};

inline constexpr double kPatternIntensity = 0.1;
inline constexpr double kBackgroundIntensity = 0.9;

struct CellCenter {
  int gi = 0;  ///< lattice column in world coordinates
  int gj = 0;  ///< lattice row in world coordinates
  Point2 nominal;
  Point2 center;  ///< after local deformation
};

struct Frame {
  GrayImage image;
  std::vector<CellCenter> centers;  ///< cells whose deformed center lies inside the image
};

struct GroundTruth {
  std::vector<std::vector<CellCenter>> centers;  ///< per frame
  std::vector<CorrespondenceSet> pairs;          ///< pairs[k-1] relates frame k-1 and frame k
};

struct Sequence {
  std::vector<GrayImage> images;
  GroundTruth truth;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::int64_t> keys) {
  std::uint64_t s = splitmix64(master);
  for (auto k : keys) s = splitmix64(s ^ static_cast<std::uint64_t>(k));
  return s;
}

inline bool inside_shape(PatternShape shape, double param, double x, double y) {
  switch (shape) {
    case PatternShape::Square: {
      const double h = 0.5 * param;
      return std::abs(x) <= h && std::abs(y) <= h;
    }
    case PatternShape::Circle:
      return x * x + y * y <= param * param;
    case PatternShape::Hexagon: {
      // Flat-top regular hexagon with circumradius `param`.
      const double ax = std::abs(x), ay = std::abs(y);
      const double s3 = std::sqrt(3.0);
      return ay <= 0.5 * s3 * param && s3 * ax + ay <= s3 * param;
    }
  }
  return false;
}

struct CellWarp {
  Eigen::Matrix2d linear = Eigen::Matrix2d::Identity();
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();
};

inline CellWarp draw_cell_warp(const DistortionSpec& d, int frame, int gi, int gj) {
  CellWarp w;
  if (d.factor == 0.0) return w;
  std::mt19937_64 rng(derive_seed(d.seed, {frame, gi, gj, 0x0a}));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double f = d.factor;
  const double tx = u(rng) * d.ranges.translation * f;
  const double ty = u(rng) * d.ranges.translation * f;
  const double th = u(rng) * d.ranges.rotation_deg * f * std::numbers::pi / 180.0;
  const double sx = 1.0 + u(rng) * d.ranges.scale * f;
  const double sy = 1.0 + u(rng) * d.ranges.scale * f;
  const double sh = u(rng) * d.ranges.shear * f;
  Eigen::Matrix2d rot;
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Eigen::Matrix2d shear;
  shear << 1.0, sh, 0.0, 1.0;
  w.linear = rot * shear * Eigen::Vector2d(sx, sy).asDiagonal();
  w.shift = Eigen::Vector2d(tx, ty);
  return w;
}

}  // namespace detail

/// Renders frame `frame_index` and reports the deformed centers it contains.
inline Frame generate_frame(const GridSpec& g, const DistortionSpec& d, const NoiseSpec& n,
                            int frame_index) {
  g.validate();
  d.validate();
  n.validate();
  const double ox = frame_index * g.motion.dx;  // window origin in world coordinates
  const double oy = frame_index * g.motion.dy;
  const double c0 = 0.5 * g.pitch;
  const double ext = g.extent() * (1.0 + d.ranges.scale * d.factor) * (1.0 + d.ranges.shear * d.factor) +
                     d.max_center_offset() + 2.0;

  GrayImage coverage(g.width, g.height, 0.0);
  Frame out;
  const int gi0 = static_cast<int>(std::floor((ox - ext - c0) / g.pitch));
  const int gi1 = static_cast<int>(std::ceil((ox + g.width + ext - c0) / g.pitch));
  const int gj0 = static_cast<int>(std::floor((oy - ext - c0) / g.pitch));
  const int gj1 = static_cast<int>(std::ceil((oy + g.height + ext - c0) / g.pitch));

  constexpr int kSub = 4;  // supersampling per axis
  for (int gj = gj0; gj <= gj1; ++gj) {
    for (int gi = gi0; gi <= gi1; ++gi) {
      const Point2 nominal{c0 + g.pitch * gi - ox, c0 + g.pitch * gj - oy};
      const auto warp = detail::draw_cell_warp(d, frame_index, gi, gj);
      const Point2 center{nominal.x + warp.shift.x(), nominal.y + warp.shift.y()};
      if (center.x >= 0.0 && center.y >= 0.0 && center.x <= g.width - 1 && center.y <= g.height - 1) {
        out.centers.push_back({gi, gj, nominal, center});
      }
      const Eigen::Matrix2d inv = warp.linear.inverse();
      const int x0 = std::max(0, static_cast<int>(std::floor(center.x - ext)));
      const int x1 = std::min(g.width - 1, static_cast<int>(std::ceil(center.x + ext)));
      const int y0 = std::max(0, static_cast<int>(std::floor(center.y - ext)));
      const int y1 = std::min(g.height - 1, static_cast<int>(std::ceil(center.y + ext)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          int hits = 0;
          for (int sy = 0; sy < kSub; ++sy) {
            for (int sx = 0; sx < kSub; ++sx) {
              const Eigen::Vector2d q(x + (sx + 0.5) / kSub - 0.5 - center.x,
                                      y + (sy + 0.5) / kSub - 0.5 - center.y);
              const Eigen::Vector2d local = inv * q;
              if (detail::inside_shape(g.shape, g.cell_param, local.x(), local.y())) ++hits;
            }
          }
          if (hits) {
            double& cv = coverage.at(x, y);
            cv = std::min(1.0, cv + static_cast<double>(hits) / (kSub * kSub));
          }
        }
      }
    }
  }

  GrayImage img(g.width, g.height);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      img.at(x, y) = kBackgroundIntensity + (kPatternIntensity - kBackgroundIntensity) * coverage.at(x, y);
    }
  }
  img = gaussian_blur_mask(img, n.gaussian_blur_mask, n.blur_sigma());

  if (n.sp_density > 0.0) {
    std::mt19937_64 rng(detail::derive_seed(n.seed, {frame_index, 0x5a}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : img.pixels()) {
      const double r = u(rng);
      if (r < n.sp_density) v = r < 0.5 * n.sp_density ? 0.0 : 1.0;
    }
  }
  if (n.awgn_variance > 0.0) {
    std::mt19937_64 rng(detail::derive_seed(n.seed, {frame_index, 0x6b}));
    std::normal_distribution<double> noise(0.0, std::sqrt(n.awgn_variance));
    for (auto& v : img.pixels()) v += noise(rng);
  }
  img.clamp();
  out.image = std::move(img);
  return out;
}

/// Ground-truth pairs link the same lattice cell in consecutive frames.
inline CorrespondenceSet link_centers(const std::vector<CellCenter>& prev,
                                      const std::vector<CellCenter>& curr) {
  CorrespondenceSet out;
  for (const auto& p : prev) {
    for (const auto& c : curr) {
      if (c.gi == p.gi && c.gj == p.gj) {
        out.push_back({p.center, c.center});
        break;
      }
    }
  }
  return out;
}

inline Sequence generate_sequence(const GridSpec& g, const DistortionSpec& d, const NoiseSpec& n) {
  g.validate();
  d.validate();
  n.validate();
  Sequence seq;
  for (int k = 0; k < g.frames; ++k) {
    Frame f = generate_frame(g, d, n, k);
    seq.images.push_back(std::move(f.image));
    seq.truth.centers.push_back(std::move(f.centers));
  }
  for (int k = 1; k < g.frames; ++k) {
    seq.truth.pairs.push_back(link_centers(seq.truth.centers[static_cast<std::size_t>(k - 1)],
                                           seq.truth.centers[static_cast<std::size_t>(k)]));
  }
  return seq;
}

/// Noise-free rendering of one undeformed pattern centered in a square patch.
inline GrayImage render_template(const GridSpec& g, int half_size) {
  const int side = 2 * half_size + 1;
  GrayImage img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
          const double qx = x + (sx + 0.5) / 4 - 0.5 - half_size;
          const double qy = y + (sy + 0.5) / 4 - 0.5 - half_size;
          if (detail::inside_shape(g.shape, g.cell_param, qx, qy)) ++hits;
        }
      }
      img.at(x, y) = kBackgroundIntensity + (kPatternIntensity - kBackgroundIntensity) * hits / 16.0;
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Keypoint-level scenes: feature sets drawn directly, without rendering.

struct KeypointSceneSpec {
  int width = 400;
  int height = 400;
  int frames = 20;
  double density = 1.0 / 400.0;  ///< keypoints per square pixel
  int dim = 64;
  double descriptor_noise = 0.05;    ///< per-component std before renormalization
  double localization_noise = 0.3;   ///< pixels, per axis
  TranslationModel mean_motion{60.0, 0.0};
  double motion_sigma = 0.0;         ///< per-frame displacement std (pixels, x and y)
  double motion_clip = 0.1;          ///< clip at mean +/- clip * |mean dx|
  std::uint64_t seed = 7;
};

struct KeypointScene {
  std::vector<FeatureSet> frames;
  std::vector<std::vector<std::size_t>> world_ids;  ///< per frame, per keypoint
  std::vector<TranslationModel> true_motion;        ///< true_motion[k-1] for pair (k-1, k)
};

inline KeypointScene generate_keypoint_scene(const KeypointSceneSpec& s) {
  if (s.frames < 2 || s.width < 1 || s.height < 1 || s.dim < 1 || !(s.density > 0.0)) {
    throw Error(ErrorCode::SpecInvalid, "invalid keypoint scene spec");
  }
  std::mt19937_64 rng(detail::derive_seed(s.seed, {0x11}));
  std::normal_distribution<double> gauss(0.0, 1.0);

  KeypointScene scene;
  // Window origins: frame k covers [ox, ox + width) in world coordinates.
  std::vector<Point2> origin(1, Point2{0.0, 0.0});
  const double clip = s.motion_clip * std::abs(s.mean_motion.dx);
  for (int k = 1; k < s.frames; ++k) {
    TranslationModel t = s.mean_motion;
    if (s.motion_sigma > 0.0) {
      t.dx += std::clamp(s.motion_sigma * gauss(rng), -clip, clip);
      t.dy += std::clamp(s.motion_sigma * gauss(rng), -clip, clip);
    }
    scene.true_motion.push_back(t);
    origin.push_back({origin.back().x + t.dx, origin.back().y + t.dy});
  }
  double minx = 0, miny = 0, maxx = 0, maxy = 0;
  for (const auto& o : origin) {
    minx = std::min(minx, o.x);
    miny = std::min(miny, o.y);
    maxx = std::max(maxx, o.x);
    maxy = std::max(maxy, o.y);
  }
  const double area = (maxx - minx + s.width) * (maxy - miny + s.height);
  const auto count = static_cast<std::size_t>(std::llround(area * s.density));
  std::uniform_real_distribution<double> ux(minx, maxx + s.width);
  std::uniform_real_distribution<double> uy(miny, maxy + s.height);
  std::vector<Point2> world(count);
  Eigen::MatrixXd desc(static_cast<Eigen::Index>(count), s.dim);
  for (std::size_t i = 0; i < count; ++i) {
    world[i] = {ux(rng), uy(rng)};
    for (int t = 0; t < s.dim; ++t) desc(static_cast<Eigen::Index>(i), t) = gauss(rng);
    desc.row(static_cast<Eigen::Index>(i)).normalize();
  }

  for (int k = 0; k < s.frames; ++k) {
    const Point2 o = origin[static_cast<std::size_t>(k)];
    std::mt19937_64 frng(detail::derive_seed(s.seed, {k, 0x22}));
    FeatureSet fs;
    std::vector<std::size_t> ids;
    std::vector<Eigen::VectorXd> rows;
    for (std::size_t i = 0; i < count; ++i) {
      const double x = world[i].x - o.x;
      const double y = world[i].y - o.y;
      if (x < 0.0 || y < 0.0 || x >= s.width || y >= s.height) continue;
      fs.positions.push_back({x + s.localization_noise * gauss(frng),
                              y + s.localization_noise * gauss(frng)});
      Eigen::VectorXd d = desc.row(static_cast<Eigen::Index>(i)).transpose();
      for (int t = 0; t < s.dim; ++t) d(t) += s.descriptor_noise * gauss(frng);
      rows.push_back(d.normalized());
      ids.push_back(i);
    }
    fs.descriptors.resize(static_cast<Eigen::Index>(rows.size()), s.dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      fs.descriptors.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    }
    scene.frames.push_back(std::move(fs));
    scene.world_ids.push_back(std::move(ids));
  }
  return scene;
}

}  // namespace feedreg

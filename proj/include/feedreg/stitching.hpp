#pragma once

// Chains pair homographies into frame-0 coordinates and blends a panorama.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "feedreg/error.hpp"
#include "feedreg/geometry.hpp"
#include "feedreg/image.hpp"

namespace feedreg {

/// Prefix products: element k maps frame k into frame 0; element 0 is identity.
inline std::vector<Homography> accumulate_to_frame0(const std::vector<Homography>& pair_homographies) {
  std::vector<Homography> out;
  out.reserve(pair_homographies.size() + 1);
  out.push_back(Homography::identity());
  for (const auto& h : pair_homographies) out.push_back(compose(out.back(), h));
  return out;
}

enum class BlendMode { Average, Feather };

/// Accumulation buffers over an integer canvas whose pixel (0, 0) sits at
/// frame-0 coordinate (origin_x, origin_y).
struct PanoramaCanvas {
  int origin_x = 0;
  int origin_y = 0;
  int width = 0;
  int height = 0;
  std::vector<double> weighted_sum;
  std::vector<double> weight;

  PanoramaCanvas() = default;
  PanoramaCanvas(int ox, int oy, int w, int h)
      : origin_x(ox), origin_y(oy), width(w), height(h),
        weighted_sum(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0),
        weight(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0) {
    if (w < 1 || h < 1) throw Error(ErrorCode::InvalidArgument, "canvas must be non-empty");
  }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }

  /// Average of contributions; pixels nobody covers are 0.
  GrayImage resolve() const {
    GrayImage img(width, height, 0.0);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t i = index(x, y);
        if (weight[i] > 0.0) img.at(x, y) = weighted_sum[i] / weight[i];
      }
    }
    return img;
  }
};

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void include(Point2 p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
};

/// Bounding box of the four pixel-center corners of a width x height frame under h.
inline Bounds warped_bounds(int width, int height, const Homography& h) {
  Bounds b;
  b.include(apply(h, {0.0, 0.0}));
  b.include(apply(h, {width - 1.0, 0.0}));
  b.include(apply(h, {0.0, height - 1.0}));
  b.include(apply(h, {width - 1.0, height - 1.0}));
  return b;
}

/// Canvas covering every warped frame, bounds expanded outward to integers.
inline PanoramaCanvas make_canvas(const std::vector<std::pair<int, int>>& sizes,
                                  const std::vector<Homography>& to_frame0) {
  Bounds all;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const Bounds b = warped_bounds(sizes[i].first, sizes[i].second, to_frame0[i]);
    all.include({b.min_x, b.min_y});
    all.include({b.max_x, b.max_y});
  }
  // Snap values within rounding noise of an integer before expanding.
  auto down = [](double v) { return static_cast<int>(std::floor(v + 1e-9)); };
  auto up = [](double v) { return static_cast<int>(std::ceil(v - 1e-9)); };
  const int x0 = down(all.min_x), y0 = down(all.min_y);
  const int x1 = up(all.max_x), y1 = up(all.max_y);
  return PanoramaCanvas(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
}

namespace detail {

inline double feather_weight(const GrayImage& img, double x, double y) {
  const double d = std::min({x + 1.0, img.width() - x, y + 1.0, img.height() - y});
  return std::max(d, 0.0);
}

template <typename Fn>
void for_each_warped_pixel(const GrayImage& img, const Homography& h, const PanoramaCanvas& canvas,
                           Fn&& fn) {
  const Homography inv = invert(h);
  const Bounds b = warped_bounds(img.width(), img.height(), h);
  const int x0 = std::max(0, static_cast<int>(std::floor(b.min_x)) - canvas.origin_x - 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(b.min_y)) - canvas.origin_y - 1);
  const int x1 = std::min(canvas.width - 1, static_cast<int>(std::ceil(b.max_x)) - canvas.origin_x + 1);
  const int y1 = std::min(canvas.height - 1, static_cast<int>(std::ceil(b.max_y)) - canvas.origin_y + 1);
  const auto& m = inv.matrix();
  for (int cy = y0; cy <= y1; ++cy) {
    for (int cx = x0; cx <= x1; ++cx) {
      const double px = cx + canvas.origin_x;
      const double py = cy + canvas.origin_y;
      const double w = m(2, 0) * px + m(2, 1) * py + m(2, 2);
      if (std::abs(w) <= kSingularTolerance) continue;
      double sx = (m(0, 0) * px + m(0, 1) * py + m(0, 2)) / w;
      double sy = (m(1, 0) * px + m(1, 1) * py + m(1, 2)) / w;
      // Absorb rounding noise so exact integer shifts stay in the source.
      if (std::abs(sx - std::round(sx)) < 1e-9) sx = std::round(sx);
      if (std::abs(sy - std::round(sy)) < 1e-9) sy = std::round(sy);
      if (!img.contains(sx, sy)) continue;
      fn(cx, cy, sx, sy);
    }
  }
}

}  // namespace detail

/// Inverse-mapped bilinear warp of `img` (frame -> frame 0 via h) into the canvas.
inline void warp(const GrayImage& img, const Homography& h, PanoramaCanvas& canvas,
                 BlendMode mode = BlendMode::Average) {
  detail::for_each_warped_pixel(img, h, canvas, [&](int cx, int cy, double sx, double sy) {
    const double wt = mode == BlendMode::Average ? 1.0 : detail::feather_weight(img, sx, sy);
    const std::size_t i = canvas.index(cx, cy);
    canvas.weighted_sum[i] += wt * img.bilinear(sx, sy);
    canvas.weight[i] += wt;
  });
}

struct Panorama {
  GrayImage image;
  int origin_x = 0;
  int origin_y = 0;
};

inline Panorama stitch(const std::vector<GrayImage>& images, const std::vector<Homography>& pair_homographies,
                       BlendMode mode = BlendMode::Average) {
  if (images.empty() || pair_homographies.size() + 1 != images.size()) {
    throw Error(ErrorCode::InvalidArgument, "need one homography per consecutive frame pair");
  }
  const auto chain = accumulate_to_frame0(pair_homographies);
  std::vector<std::pair<int, int>> sizes;
  for (const auto& img : images) sizes.emplace_back(img.width(), img.height());
  PanoramaCanvas canvas = make_canvas(sizes, chain);
  for (std::size_t i = 0; i < images.size(); ++i) warp(images[i], chain[i], canvas, mode);
  return {canvas.resolve(), canvas.origin_x, canvas.origin_y};
}

/// Mean absolute intensity difference between two frames over the canvas
/// pixels both cover. Returns 0 with zero count when they do not overlap.
struct OverlapDisagreement {
  double mean_abs_diff = 0.0;
  std::size_t pixels = 0;
};

inline OverlapDisagreement overlap_disagreement(const GrayImage& a, const Homography& ha,
                                                const GrayImage& b, const Homography& hb,
                                                const PanoramaCanvas& canvas) {
  const Homography binv = invert(hb);
  OverlapDisagreement out;
  double acc = 0.0;
  detail::for_each_warped_pixel(a, ha, canvas, [&](int cx, int cy, double sx, double sy) {
    const Point2 q = apply(binv, {static_cast<double>(cx + canvas.origin_x),
                                  static_cast<double>(cy + canvas.origin_y)});
    double qx = q.x, qy = q.y;
    if (std::abs(qx - std::round(qx)) < 1e-9) qx = std::round(qx);
    if (std::abs(qy - std::round(qy)) < 1e-9) qy = std::round(qy);
    if (!b.contains(qx, qy)) return;
    acc += std::abs(a.bilinear(sx, sy) - b.bilinear(qx, qy));
    ++out.pixels;
  });
  if (out.pixels) out.mean_abs_diff = acc / static_cast<double>(out.pixels);
  return out;
}

struct GhostingReport {
  std::vector<OverlapDisagreement> per_pair;  ///< per_pair[k-1] for frames (k-1, k)
  double overall = 0.0;                       ///< overlap-weighted mean
};

/// Ghosting observable: disagreement of consecutive frames where they overlap
/// in the panorama.
inline GhostingReport ghosting(const std::vector<GrayImage>& images,
                               const std::vector<Homography>& pair_homographies) {
  if (images.empty() || pair_homographies.size() + 1 != images.size()) {
    throw Error(ErrorCode::InvalidArgument, "need one homography per consecutive frame pair");
  }
  const auto chain = accumulate_to_frame0(pair_homographies);
  std::vector<std::pair<int, int>> sizes;
  for (const auto& img : images) sizes.emplace_back(img.width(), img.height());
  const PanoramaCanvas canvas = make_canvas(sizes, chain);
  GhostingReport rep;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 1; k < images.size(); ++k) {
    const auto d = overlap_disagreement(images[k], chain[k], images[k - 1], chain[k - 1], canvas);
    rep.per_pair.push_back(d);
    acc += d.mean_abs_diff * static_cast<double>(d.pixels);
    n += d.pixels;
  }
  if (n) rep.overall = acc / static_cast<double>(n);
  return rep;
}

/// CSV: pair,overlap_pixels,mean_abs_diff
inline void write_ghosting(std::ostream& os, const GhostingReport& g) {
  std::ostringstream o;
  o.precision(10);
  o << "pair,overlap_pixels,mean_abs_diff\n";
  for (std::size_t i = 0; i < g.per_pair.size(); ++i) {
    o << i + 1 << ',' << g.per_pair[i].pixels << ',' << g.per_pair[i].mean_abs_diff << '\n';
  }
  os << o.str();
}

}  // namespace feedreg

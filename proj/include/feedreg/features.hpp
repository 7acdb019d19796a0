#pragma once

// Keypoint detection and patch descriptors.
//
// Two reference detectors ship with the library: a Harris corner detector and
// a scale-normalized Laplacian-of-Gaussian blob detector. Both feed the same
// descriptor: a (2h x 2h) grid of bilinear samples around the keypoint,
// mean-subtracted and scaled to unit Euclidean norm. The sampling stride is
// 1 px for corners and proportional to the detection scale for blobs.

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "feedreg/error.hpp"
#include "feedreg/filters.hpp"
#include "feedreg/geometry.hpp"
#include "feedreg/image.hpp"

namespace feedreg {

enum class Detector { Harris, Blob };

struct ExtractorConfig {
  Detector detector = Detector::Harris;

  // Harris corner response
  double harris_k = 0.04;
  double harris_sigma = 1.5;

  // LoG blob response, detection on interior levels only
  std::vector<double> blob_sigmas = {4.0, 5.657, 8.0, 11.314, 16.0, 22.627};
  /// Descriptor window half-width in units of the blob sigma.
  double blob_support = 2.0;
  /// Principal-curvature ratio above which a blob is rejected as an edge.
  double blob_edge_ratio = 10.0;
  /// +1 keeps dark blobs on a light background, -1 light blobs, 0 both.
  int blob_polarity = 0;

  double response_threshold = 0.01;  ///< fraction of the strongest response
  int nms_radius = 5;
  int border_margin = 8;
  int patch_half_width = 8;
  int descriptor_dim = 256;

  void validate() const {
    if (patch_half_width < 1) {
      throw Error(ErrorCode::InvalidArgument, "patch half-width must be >= 1");
    }
    if (border_margin < patch_half_width) {
      throw Error(ErrorCode::InvalidArgument, "border margin must be >= patch half-width");
    }
    if (descriptor_dim != 4 * patch_half_width * patch_half_width) {
      throw Error(ErrorCode::InvalidArgument, "descriptor_dim must equal (2 * patch_half_width)^2");
    }
    if (nms_radius < 0 || response_threshold < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "negative detector parameter");
    }
    if (detector == Detector::Blob && blob_sigmas.size() < 3) {
      throw Error(ErrorCode::InvalidArgument, "blob detector needs at least three scales");
    }
  }
};

/// Preset tuned for the centers of the synthetic grid patterns.
inline ExtractorConfig blob_extractor_config() {
  ExtractorConfig cfg;
  cfg.detector = Detector::Blob;
  cfg.blob_sigmas = {5.657, 8.0, 11.314, 16.0, 22.627};
  cfg.blob_polarity = 1;
  cfg.response_threshold = 0.1;
  cfg.nms_radius = 10;
  return cfg;
}

struct FeatureSet {
  std::vector<Point2> positions;
  Eigen::MatrixXd descriptors;  ///< one row per position
  bool normalized = true;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  int dim() const { return static_cast<int>(descriptors.cols()); }
};

namespace detail {

struct RawKeypoint {
  Point2 pos;
  double response = 0.0;
  double stride = 1.0;
  std::size_t level = 0;
};

// Keep strongest responses first; ties resolved in raster order. A kept
// keypoint suppresses others within max(radius, radius_of(kept)).
template <typename RadiusFn>
void suppress_neighbors(std::vector<RawKeypoint>& kps, int radius, RadiusFn&& radius_of) {
  std::stable_sort(kps.begin(), kps.end(), [](const RawKeypoint& a, const RawKeypoint& b) {
    return std::abs(a.response) > std::abs(b.response);
  });
  std::vector<RawKeypoint> kept;
  for (const auto& kp : kps) {
    const bool close = std::any_of(kept.begin(), kept.end(), [&](const RawKeypoint& k) {
      const double r = std::max(static_cast<double>(radius), radius_of(k));
      return squared_distance(k.pos, kp.pos) <= r * r;
    });
    if (!close) kept.push_back(kp);
  }
  kps = std::move(kept);
}

inline void suppress_neighbors(std::vector<RawKeypoint>& kps, int radius) {
  suppress_neighbors(kps, radius, [](const RawKeypoint&) { return 0.0; });
}

inline std::vector<RawKeypoint> detect_harris(const GrayImage& img, const ExtractorConfig& cfg) {
  const int w = img.width();
  const int h = img.height();
  GrayImage ixx(w, h), iyy(w, h), ixy(w, h);
  auto px = [&](int x, int y) {
    return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      ixx.at(x, y) = gx * gx;
      iyy.at(x, y) = gy * gy;
      ixy.at(x, y) = gx * gy;
    }
  }
  ixx = gaussian_blur(ixx, cfg.harris_sigma);
  iyy = gaussian_blur(iyy, cfg.harris_sigma);
  ixy = gaussian_blur(ixy, cfg.harris_sigma);

  GrayImage resp(w, h);
  double max_resp = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = ixx.at(x, y), b = iyy.at(x, y), c = ixy.at(x, y);
      const double r = (a * b - c * c) - cfg.harris_k * (a + b) * (a + b);
      resp.at(x, y) = r;
      max_resp = std::max(max_resp, r);
    }
  }
  std::vector<RawKeypoint> out;
  if (max_resp <= 1e-12) return out;
  const double thr = cfg.response_threshold * max_resp;
  const int m = cfg.border_margin;
  for (int y = m; y < h - m; ++y) {
    for (int x = m; x < w - m; ++x) {
      const double r = resp.at(x, y);
      if (r <= thr) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx != 0 || dy != 0) && resp.at(x + dx, y + dy) > r) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) out.push_back({{static_cast<double>(x), static_cast<double>(y)}, r, 1.0, 0});
    }
  }
  suppress_neighbors(out, cfg.nms_radius);
  return out;
}

inline double subpixel_offset(double lo, double mid, double hi) {
  const double denom = lo - 2.0 * mid + hi;
  if (std::abs(denom) < 1e-15) return 0.0;
  return std::clamp(0.5 * (lo - hi) / denom, -0.5, 0.5);
}

inline std::vector<RawKeypoint> detect_blobs(const GrayImage& img, const ExtractorConfig& cfg,
                                             std::vector<GrayImage>& levels) {
  const int w = img.width();
  const int h = img.height();
  const auto& sigmas = cfg.blob_sigmas;
  std::vector<GrayImage> resp;
  levels.clear();
  double max_abs = 0.0;
  for (double s : sigmas) {
    GrayImage l = gaussian_blur(img, s);
    GrayImage r(w, h);
    for (int y = 1; y < h - 1; ++y) {
      for (int x = 1; x < w - 1; ++x) {
        const double lap =
            l.at(x + 1, y) + l.at(x - 1, y) + l.at(x, y + 1) + l.at(x, y - 1) - 4.0 * l.at(x, y);
        r.at(x, y) = s * s * lap;
        max_abs = std::max(max_abs, std::abs(r.at(x, y)));
      }
    }
    levels.push_back(std::move(l));
    resp.push_back(std::move(r));
  }
  std::vector<RawKeypoint> out;
  if (max_abs <= 1e-12) return out;
  const double thr = cfg.response_threshold * max_abs;
  const int m = std::max(cfg.border_margin, 1);
  for (std::size_t li = 1; li + 1 < sigmas.size(); ++li) {
    const GrayImage& r = resp[li];
    for (int y = m; y < h - m; ++y) {
      for (int x = m; x < w - m; ++x) {
        const double v = r.at(x, y);
        if (std::abs(v) <= thr) continue;
        const double sign = v > 0 ? 1.0 : -1.0;
        if (cfg.blob_polarity != 0 && sign != cfg.blob_polarity) continue;
        bool is_ext = true;
        for (std::size_t lj = li - 1; lj <= li + 1 && is_ext; ++lj) {
          for (int dy = -1; dy <= 1 && is_ext; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (lj == li && dx == 0 && dy == 0) continue;
              if (sign * resp[lj].at(x + dx, y + dy) > sign * v) {
                is_ext = false;
                break;
              }
            }
          }
        }
        if (!is_ext) continue;
        const GrayImage& l = levels[li];
        const double dxx = l.at(x + 1, y) + l.at(x - 1, y) - 2.0 * l.at(x, y);
        const double dyy = l.at(x, y + 1) + l.at(x, y - 1) - 2.0 * l.at(x, y);
        const double dxy = 0.25 * (l.at(x + 1, y + 1) - l.at(x + 1, y - 1) - l.at(x - 1, y + 1) +
                                   l.at(x - 1, y - 1));
        const double det = dxx * dyy - dxy * dxy;
        const double er = cfg.blob_edge_ratio;
        if (det <= 0.0 || (dxx + dyy) * (dxx + dyy) * er >= (er + 1.0) * (er + 1.0) * det) continue;
        const double ox = subpixel_offset(r.at(x - 1, y), v, r.at(x + 1, y));
        const double oy = subpixel_offset(r.at(x, y - 1), v, r.at(x, y + 1));
        const double stride = cfg.blob_support * sigmas[li] / cfg.patch_half_width;
        out.push_back({{x + ox, y + oy}, v, stride, li});
      }
    }
  }
  // A blob of scale sigma covers radius sqrt(2) * sigma; weaker blobs inside it are its parts.
  suppress_neighbors(out, cfg.nms_radius,
                     [&](const RawKeypoint& k) { return std::numbers::sqrt2 * sigmas[k.level]; });
  return out;
}

}  // namespace detail

/// Detects keypoints and computes unit-norm patch descriptors.
/// Deterministic for a fixed image and config.
inline FeatureSet extract(const GrayImage& img, const ExtractorConfig& cfg = {}) {
  cfg.validate();
  const int min_side = 2 * cfg.patch_half_width + 1;
  if (img.width() < min_side || img.height() < min_side) {
    throw Error(ErrorCode::ImageTooSmall, "image smaller than descriptor patch");
  }

  std::vector<detail::RawKeypoint> raw;
  std::vector<GrayImage> levels;
  std::vector<GrayImage> sample_src;
  if (cfg.detector == Detector::Harris) {
    raw = detail::detect_harris(img, cfg);
  } else {
    raw = detail::detect_blobs(img, cfg, levels);
    // Anti-aliased sources for the strided sampling grid, one per scale.
    sample_src.reserve(levels.size());
    for (double s : cfg.blob_sigmas) {
      sample_src.push_back(gaussian_blur(img, 0.5 * cfg.blob_support * s / cfg.patch_half_width));
    }
  }
  // Raster order keeps the output independent of response ties.
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
    return a.pos.y != b.pos.y ? a.pos.y < b.pos.y : a.pos.x < b.pos.x;
  });

  const int side = 2 * cfg.patch_half_width;
  FeatureSet fs;
  std::vector<Eigen::VectorXd> rows;
  Eigen::VectorXd d(cfg.descriptor_dim);
  const double lo = cfg.border_margin;
  for (const auto& kp : raw) {
    if (kp.pos.x < lo || kp.pos.y < lo || kp.pos.x > img.width() - 1 - lo ||
        kp.pos.y > img.height() - 1 - lo) {
      continue;
    }
    const GrayImage& src = cfg.detector == Detector::Harris ? img : sample_src[kp.level];
    bool inside = true;
    for (int j = 0; j < side && inside; ++j) {
      for (int i = 0; i < side; ++i) {
        const double sx = kp.pos.x + (i - cfg.patch_half_width + 0.5) * kp.stride;
        const double sy = kp.pos.y + (j - cfg.patch_half_width + 0.5) * kp.stride;
        if (!src.contains(sx, sy)) {
          inside = false;
          break;
        }
        d(j * side + i) = src.bilinear(sx, sy);
      }
    }
    if (!inside) continue;
    d.array() -= d.mean();
    const double n = d.norm();
    if (n <= 1e-9) continue;  // zero-variance patch
    rows.push_back(d / n);
    fs.positions.push_back(kp.pos);
  }
  fs.descriptors.resize(static_cast<Eigen::Index>(rows.size()), cfg.descriptor_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    fs.descriptors.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return fs;
}

/// Per-row sum of squared descriptor components.
inline Eigen::VectorXd descriptor_distance_pre(const Eigen::MatrixXd& descriptors) {
  return descriptors.rowwise().squaredNorm();
}

inline Eigen::VectorXd descriptor_distance_pre(const FeatureSet& fs) {
  return descriptor_distance_pre(fs.descriptors);
}

// ---------------------------------------------------------------------------
// Text format: "n dim" header, then "x y d_1 ... d_dim" per keypoint.

inline void write_features(std::ostream& os, const FeatureSet& fs) {
  std::ostringstream s;
  s.precision(17);
  s << fs.size() << ' ' << fs.dim() << '\n';
  for (std::size_t i = 0; i < fs.size(); ++i) {
    s << fs.positions[i].x << ' ' << fs.positions[i].y;
    for (int k = 0; k < fs.dim(); ++k) s << ' ' << fs.descriptors(static_cast<Eigen::Index>(i), k);
    s << '\n';
  }
  os << s.str();
}

inline FeatureSet read_features(std::istream& is) {
  std::size_t n = 0;
  int dim = 0;
  if (!(is >> n >> dim) || dim < 0) throw Error(ErrorCode::Parse, "bad feature header");
  FeatureSet fs;
  fs.positions.resize(n);
  fs.descriptors.resize(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> fs.positions[i].x >> fs.positions[i].y)) {
      throw Error(ErrorCode::Parse, "truncated feature row " + std::to_string(i));
    }
    for (int k = 0; k < dim; ++k) {
      if (!(is >> fs.descriptors(static_cast<Eigen::Index>(i), k))) {
        throw Error(ErrorCode::Parse, "truncated descriptor row " + std::to_string(i));
      }
    }
  }
  return fs;
}

}  // namespace feedreg

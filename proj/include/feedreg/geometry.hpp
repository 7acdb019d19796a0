#pragma once

// Homogeneous 2-D transforms between consecutive frames.
//
// Convention: a Homography returned by the estimators maps points of the
// current frame (image_k) into the coordinates of the previous frame
// (image_{k-1}). A TranslationModel (dx, dy) therefore satisfies
// p_prev = p_curr + (dx, dy).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "feedreg/error.hpp"

namespace feedreg {

inline constexpr double kSingularTolerance = 1e-12;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

inline double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(Point2 a, Point2 b) { return std::sqrt(squared_distance(a, b)); }

inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// 3x3 projective transform stored with h(2,2) == 1 whenever that entry is
/// not vanishing. Construction rejects singular matrices.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()) {}

  explicit Homography(const Eigen::Matrix3d& h) : h_(h) {
    if (!h_.allFinite()) {
      throw Error(ErrorCode::SingularMatrix, "homography has non-finite entries");
    }
    normalize();
    if (std::abs(h_.determinant()) <= kSingularTolerance) {
      throw Error(ErrorCode::SingularMatrix, "homography determinant below tolerance");
    }
  }

  static Homography identity() { return Homography(); }

  static Homography from_row_major(const std::vector<double>& v) {
    if (v.size() != 9) {
      throw Error(ErrorCode::Parse, "homography needs 9 values, got " + std::to_string(v.size()));
    }
    Eigen::Matrix3d m;
    m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
    return Homography(m);
  }

  const Eigen::Matrix3d& matrix() const { return h_; }
  double operator()(int r, int c) const { return h_(r, c); }
  double determinant() const { return h_.determinant(); }

  /// Largest elementwise absolute difference after normalization.
  double max_abs_difference(const Homography& other) const {
    return (h_ - other.h_).cwiseAbs().maxCoeff();
  }

 private:
  void normalize() {
    const double s = h_(2, 2);
    if (std::abs(s) > kSingularTolerance) {
      h_ /= s;
    } else {
      // Vanishing h22: keep the projective class but fix the scale.
      const double n = h_.norm();
      if (n > 0.0) h_ /= n;
    }
  }

  Eigen::Matrix3d h_;
};

struct TranslationModel {
  double dx = 0.0;
  double dy = 0.0;

  Homography to_homography() const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 2) = dx;
    m(1, 2) = dy;
    return Homography(m);
  }

  friend bool operator==(const TranslationModel&, const TranslationModel&) = default;
};

struct Correspondence {
  Point2 prev;  ///< location in image_{k-1}
  Point2 curr;  ///< location in image_k
};

using CorrespondenceSet = std::vector<Correspondence>;

inline Point2 apply(const Homography& h, Point2 p) {
  const auto& m = h.matrix();
  const double x = m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2);
  const double y = m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2);
  const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
  if (std::abs(w) <= kSingularTolerance) {
    throw Error(ErrorCode::DegenerateProjection, "homogeneous scale vanishes");
  }
  return {x / w, y / w};
}

/// apply(compose(a, b), p) == apply(a, apply(b, p))
inline Homography compose(const Homography& a, const Homography& b) {
  const Eigen::Matrix3d product = a.matrix() * b.matrix();
  if (std::abs(product.determinant()) <= kSingularTolerance) {
    throw Error(ErrorCode::DegenerateProjection, "composed homography is singular");
  }
  return Homography(product);
}

inline Homography invert(const Homography& h) {
  if (std::abs(h.determinant()) <= kSingularTolerance) {
    throw Error(ErrorCode::SingularMatrix, "cannot invert singular homography");
  }
  return Homography(h.matrix().inverse());
}

namespace detail {

// Similarity taking the point cloud centroid to the origin with mean distance sqrt(2).
inline Eigen::Matrix3d normalizing_transform(const std::vector<Point2>& pts) {
  double cx = 0.0;
  double cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  if (mean_dist <= std::numeric_limits<double>::epsilon()) {
    throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

}  // namespace detail

/// Normalized direct linear transform. The result maps curr -> prev.
inline Homography estimate_homography_dlt(const CorrespondenceSet& c) {
  if (c.size() < 4) {
    throw Error(ErrorCode::InsufficientPairs,
                "DLT needs at least 4 pairs, got " + std::to_string(c.size()));
  }
  std::vector<Point2> src;
  std::vector<Point2> dst;
  src.reserve(c.size());
  dst.reserve(c.size());
  for (const auto& pr : c) {
    if (!is_finite(pr.prev) || !is_finite(pr.curr)) {
      throw Error(ErrorCode::DegenerateConfiguration, "non-finite correspondence");
    }
    src.push_back(pr.curr);
    dst.push_back(pr.prev);
  }
  const Eigen::Matrix3d ts = detail::normalizing_transform(src);
  const Eigen::Matrix3d td = detail::normalizing_transform(dst);

  const auto n = static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    const double x = s.x(), y = s.y();
    const double u = d.x(), v = d.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  // A unique solution needs rank 8: the null space must be one-dimensional.
  if (sv(7) <= 1e-9 * sv(0)) {
    throw Error(ErrorCode::DegenerateConfiguration, "design matrix is rank deficient");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d denorm = td.inverse() * hn * ts;
  try {
    return Homography(denorm);
  } catch (const Error&) {
    throw Error(ErrorCode::DegenerateConfiguration, "estimated homography is singular");
  }
}

/// Mean displacement prev - curr over all pairs.
inline TranslationModel estimate_translation(const CorrespondenceSet& c) {
  if (c.empty()) throw Error(ErrorCode::EmptyCorrespondences, "no pairs to average");
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& pr : c) {
    sx += pr.prev.x - pr.curr.x;
    sy += pr.prev.y - pr.curr.y;
  }
  const auto n = static_cast<double>(c.size());
  return {sx / n, sy / n};
}

/// Componentwise median of prev - curr; a robust alternative to the mean.
inline TranslationModel estimate_translation_median(const CorrespondenceSet& c) {
  if (c.empty()) throw Error(ErrorCode::EmptyCorrespondences, "no pairs to average");
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(c.size());
  ys.reserve(c.size());
  for (const auto& pr : c) {
    xs.push_back(pr.prev.x - pr.curr.x);
    ys.push_back(pr.prev.y - pr.curr.y);
  }
  auto median = [](std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
      m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
  };
  return {median(xs), median(ys)};
}

/// sqrt(mean ||t * curr - prev||^2)
inline double rmse(const CorrespondenceSet& c, const Homography& t) {
  if (c.empty()) throw Error(ErrorCode::EmptyCorrespondences, "rmse of empty set");
  double acc = 0.0;
  for (const auto& pr : c) acc += squared_distance(apply(t, pr.curr), pr.prev);
  return std::sqrt(acc / static_cast<double>(c.size()));
}

// ---------------------------------------------------------------------------
// Text formats

inline void write_correspondences(std::ostream& os, const CorrespondenceSet& c) {
  std::ostringstream line;
  line.precision(17);
  for (const auto& pr : c) {
    line.str({});
    line << pr.prev.x << ',' << pr.prev.y << ',' << pr.curr.x << ',' << pr.curr.y << '\n';
    os << line.str();
  }
}

inline CorrespondenceSet read_correspondences(std::istream& is) {
  CorrespondenceSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Correspondence pr;
    if (!(ls >> pr.prev.x >> pr.prev.y >> pr.curr.x >> pr.curr.y)) {
      throw Error(ErrorCode::Parse, "bad correspondence on line " + std::to_string(lineno));
    }
    out.push_back(pr);
  }
  return out;
}

inline void write_homography(std::ostream& os, const Homography& h) {
  std::ostringstream s;
  s.precision(17);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      s << h(r, c) << (r == 2 && c == 2 ? '\n' : ' ');
    }
  }
  os << s.str();
}

inline Homography read_homography(std::istream& is) {
  std::vector<double> v;
  double x = 0.0;
  while (v.size() < 9 && is >> x) v.push_back(x);
  return Homography::from_row_major(v);
}

}  // namespace feedreg

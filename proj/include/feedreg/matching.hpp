#pragma once

// Descriptor matching: the global lowest-SSD baseline, the prior-gated
// matcher, loop and vectorized SSD kernels, RANSAC filtering and NCC maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "feedreg/error.hpp"
#include "feedreg/features.hpp"
#include "feedreg/geometry.hpp"
#include "feedreg/image.hpp"

namespace feedreg {

/// Marker for SsdMatrix entries that were not computed.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

struct GateConfig {
  double radius = 10.0;    ///< pixels
  double threshold = 1.0;  ///< maximum accepted SSD

  void validate() const {
    if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "gate radius must be > 0");
    if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "gate threshold must be > 0");
  }
};

struct Match {
  std::size_t src = 0;  ///< row in the previous frame's FeatureSet
  std::size_t dst = 0;  ///< row in the current frame's FeatureSet
  double ssd = 0.0;
};

struct MatchSet {
  std::vector<Match> pairs;
  /// Number of descriptor SSD evaluations spent producing this set.
  std::uint64_t evaluations = 0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  CorrespondenceSet correspondences(const FeatureSet& prev, const FeatureSet& curr) const {
    CorrespondenceSet c;
    c.reserve(pairs.size());
    for (const auto& m : pairs) c.push_back({prev.positions[m.src], curr.positions[m.dst]});
    return c;
  }
};

/// Dense m x n SSD table; entries outside the candidate lists hold kMissing.
using SsdMatrix = Eigen::MatrixXd;

/// Per-source candidate target indices (sorted ascending).
using CandidateLists = std::vector<std::vector<std::size_t>>;

enum class SsdKernel { Loop, Vectorized };

namespace detail {

inline void check_dims(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols() && a.rows() > 0 && b.rows() > 0) {
    throw Error(ErrorCode::DimensionMismatch, "descriptor dimensions differ: " +
                                                  std::to_string(a.cols()) + " vs " +
                                                  std::to_string(b.cols()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SSD kernels

/// Sum of squared componentwise differences.
template <typename A, typename B>
double ssd(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "ssd operands differ in length");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = a(i) - b(i);
    acc += d * d;
  }
  return acc;
}

inline double ssd(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "ssd operands differ in length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

/// Elementwise SSD table, one scalar loop per pair. Without candidates every
/// entry is computed.
inline SsdMatrix ssd_matrix_loop(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& curr,
                                 const CandidateLists* candidates = nullptr) {
  detail::check_dims(prev, curr);
  const Eigen::Index m = prev.rows();
  const Eigen::Index n = curr.rows();
  const Eigen::Index dim = prev.cols();
  SsdMatrix out = SsdMatrix::Constant(m, n, kMissing);
  auto one = [&](Eigen::Index j, Eigen::Index k) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < dim; ++t) {
      const double d = prev(j, t) - curr(k, t);
      acc += d * d;
    }
    out(j, k) = acc;
  };
  for (Eigen::Index j = 0; j < m; ++j) {
    if (candidates) {
      for (std::size_t k : (*candidates)[static_cast<std::size_t>(j)]) {
        one(j, static_cast<Eigen::Index>(k));
      }
    } else {
      for (Eigen::Index k = 0; k < n; ++k) one(j, k);
    }
  }
  return out;
}

/// Norm-expansion form: |a|^2 broadcast over columns plus |b|^2 broadcast over
/// rows minus twice the Gram matrix. With candidates, only the listed cross
/// terms are formed and every other entry is kMissing.
inline SsdMatrix ssd_matrix_vectorized(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& curr,
                                       const CandidateLists* candidates = nullptr) {
  detail::check_dims(prev, curr);
  const Eigen::Index m = prev.rows();
  const Eigen::Index n = curr.rows();
  const Eigen::VectorXd pn = prev.rowwise().squaredNorm();
  const Eigen::VectorXd cn = curr.rowwise().squaredNorm();
  if (!candidates) {
    SsdMatrix out(m, n);
    out.noalias() = -2.0 * prev * curr.transpose();
    out.colwise() += pn;
    out.rowwise() += cn.transpose();
    // Cancellation can leave tiny negatives for identical rows.
    return out.cwiseMax(0.0);
  }
  SsdMatrix out = SsdMatrix::Constant(m, n, kMissing);
  Eigen::MatrixXd gathered;
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& cand = (*candidates)[static_cast<std::size_t>(j)];
    if (cand.empty()) continue;
    gathered.resize(static_cast<Eigen::Index>(cand.size()), curr.cols());
    for (std::size_t c = 0; c < cand.size(); ++c) {
      gathered.row(static_cast<Eigen::Index>(c)) = curr.row(static_cast<Eigen::Index>(cand[c]));
    }
    const Eigen::VectorXd dots = gathered * prev.row(j).transpose();
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const auto k = static_cast<Eigen::Index>(cand[c]);
      out(j, k) = std::max(0.0, pn(j) + cn(k) - 2.0 * dots(static_cast<Eigen::Index>(c)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spatial candidate search

/// Uniform bucket grid over target keypoints for disc queries.
class SpatialIndex {
 public:
  SpatialIndex(std::vector<Point2> pts, double cell) : pts_(std::move(pts)), cell_(cell) {
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      buckets_[key(cell_of(pts_[i].x), cell_of(pts_[i].y))].push_back(i);
    }
  }

  /// Indices within Euclidean distance r of q, ascending.
  std::vector<std::size_t> within(Point2 q, double r) const {
    std::vector<std::size_t> out;
    const std::int64_t x0 = cell_of(q.x - r), x1 = cell_of(q.x + r);
    const std::int64_t y0 = cell_of(q.y - r), y1 = cell_of(q.y + r);
    const double r2 = r * r;
    for (std::int64_t cy = y0; cy <= y1; ++cy) {
      for (std::int64_t cx = x0; cx <= x1; ++cx) {
        auto it = buckets_.find(key(cx, cy));
        if (it == buckets_.end()) continue;
        for (std::size_t i : it->second) {
          if (squared_distance(pts_[i], q) <= r2) out.push_back(i);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::int64_t cell_of(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
  static std::uint64_t key(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^ (static_cast<std::uint64_t>(cy) & 0xffffffffULL);
  }

  std::vector<Point2> pts_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

/// Projects each source by the inverse of the prior and lists the targets
/// inside the gate disc around the projection.
inline CandidateLists gate_candidates(const FeatureSet& prev, const FeatureSet& curr,
                                      const TranslationModel& prior, double radius) {
  const Homography back = invert(prior.to_homography());
  const SpatialIndex index(curr.positions, std::max(radius, 1.0));
  CandidateLists out(prev.size());
  for (std::size_t j = 0; j < prev.size(); ++j) {
    out[j] = index.within(apply(back, prev.positions[j]), radius);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matchers

/// For every source, the globally smallest-SSD target; kept iff ssd <= threshold.
inline MatchSet match_lowest_ssd(const FeatureSet& prev, const FeatureSet& curr, double threshold,
                                 SsdKernel kernel = SsdKernel::Vectorized) {
  detail::check_dims(prev.descriptors, curr.descriptors);
  MatchSet ms;
  if (prev.empty() || curr.empty()) return ms;
  const SsdMatrix table = kernel == SsdKernel::Loop
                              ? ssd_matrix_loop(prev.descriptors, curr.descriptors)
                              : ssd_matrix_vectorized(prev.descriptors, curr.descriptors);
  ms.evaluations = static_cast<std::uint64_t>(prev.size()) * curr.size();
  for (Eigen::Index j = 0; j < table.rows(); ++j) {
    Eigen::Index best = 0;
    const double v = table.row(j).minCoeff(&best);
    if (v <= threshold) {
      ms.pairs.push_back({static_cast<std::size_t>(j), static_cast<std::size_t>(best), v});
    }
  }
  return ms;
}

/// Prior-gated matcher: candidates are targets within the gate disc around
/// the inverse-translated source; argmin SSD among them, kept iff <= threshold.
/// Ties go to the smaller spatial residual, then the lower target index.
inline MatchSet match_gated(const FeatureSet& prev, const FeatureSet& curr,
                            const TranslationModel& prior, const GateConfig& gate,
                            SsdKernel kernel = SsdKernel::Vectorized) {
  gate.validate();
  detail::check_dims(prev.descriptors, curr.descriptors);
  MatchSet ms;
  if (prev.empty() || curr.empty()) return ms;
  const CandidateLists cand = gate_candidates(prev, curr, prior, gate.radius);
  const Homography back = invert(prior.to_homography());

  Eigen::VectorXd cn;
  if (kernel == SsdKernel::Vectorized) cn = curr.descriptors.rowwise().squaredNorm();
  Eigen::MatrixXd gathered;

  for (std::size_t j = 0; j < prev.size(); ++j) {
    const auto& c = cand[j];
    if (c.empty()) continue;
    ms.evaluations += c.size();
    const auto row = prev.descriptors.row(static_cast<Eigen::Index>(j));
    std::vector<double> d(c.size());
    if (kernel == SsdKernel::Loop) {
      for (std::size_t i = 0; i < c.size(); ++i) {
        d[i] = ssd(row, curr.descriptors.row(static_cast<Eigen::Index>(c[i])));
      }
    } else {
      gathered.resize(static_cast<Eigen::Index>(c.size()), curr.descriptors.cols());
      for (std::size_t i = 0; i < c.size(); ++i) {
        gathered.row(static_cast<Eigen::Index>(i)) = curr.descriptors.row(static_cast<Eigen::Index>(c[i]));
      }
      const Eigen::VectorXd dots = gathered * row.transpose();
      const double pn = row.squaredNorm();
      for (std::size_t i = 0; i < c.size(); ++i) {
        d[i] = std::max(0.0, pn + cn(static_cast<Eigen::Index>(c[i])) - 2.0 * dots(static_cast<Eigen::Index>(i)));
      }
    }
    const Point2 projected = apply(back, prev.positions[j]);
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i) {
      if (d[i] < d[best]) {
        best = i;
      } else if (d[i] == d[best]) {
        const double di = squared_distance(curr.positions[c[i]], projected);
        const double db = squared_distance(curr.positions[c[best]], projected);
        if (di < db) best = i;  // equal distance keeps the lower index
      }
    }
    if (d[best] <= gate.threshold) ms.pairs.push_back({j, c[best], d[best]});
  }
  return ms;
}

// ---------------------------------------------------------------------------
// RANSAC

struct RansacConfig {
  int iterations = 2000;
  double inlier_tolerance = 3.0;  ///< pixels, forward reprojection error
  std::uint64_t seed = 42;
};

struct RansacResult {
  Homography model;
  std::vector<std::size_t> inliers;  ///< indices into the input set, ascending
};

/// Best 4-point hypothesis by inlier count, refit by DLT on its inliers.
inline RansacResult ransac_homography(const CorrespondenceSet& c, const RansacConfig& cfg = {}) {
  if (c.size() < 4) {
    throw Error(ErrorCode::InsufficientPairs,
                "RANSAC needs at least 4 pairs, got " + std::to_string(c.size()));
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
  const double tol2 = cfg.inlier_tolerance * cfg.inlier_tolerance;

  auto inliers_of = [&](const Homography& h) {
    std::vector<std::size_t> in;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Eigen::Vector3d p = h.matrix() * Eigen::Vector3d(c[i].curr.x, c[i].curr.y, 1.0);
      if (std::abs(p.z()) <= kSingularTolerance) continue;
      const Point2 q{p.x() / p.z(), p.y() / p.z()};
      if (squared_distance(q, c[i].prev) < tol2) in.push_back(i);
    }
    return in;
  };

  std::vector<std::size_t> best_in;
  Homography best_h;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::size_t idx[4];
    for (int s = 0; s < 4; ++s) {
      bool fresh = false;
      while (!fresh) {
        idx[s] = pick(rng);
        fresh = std::find(idx, idx + s, idx[s]) == idx + s;
      }
    }
    CorrespondenceSet sample{c[idx[0]], c[idx[1]], c[idx[2]], c[idx[3]]};
    Homography h;
    try {
      h = estimate_homography_dlt(sample);
    } catch (const Error&) {
      continue;  // degenerate minimal sample
    }
    auto in = inliers_of(h);
    if (in.size() > best_in.size()) {
      best_in = std::move(in);
      best_h = h;
      if (best_in.size() == c.size()) break;
    }
  }
  if (best_in.size() < 4) {
    throw Error(ErrorCode::DegenerateConfiguration, "no consensus set with four or more pairs");
  }
  CorrespondenceSet support;
  for (std::size_t i : best_in) support.push_back(c[i]);
  try {
    Homography refit = estimate_homography_dlt(support);
    auto refit_in = inliers_of(refit);
    if (refit_in.size() >= best_in.size()) return {refit, std::move(refit_in)};
  } catch (const Error&) {
  }
  return {best_h, std::move(best_in)};
}

/// RANSAC over a MatchSet; returns the surviving matches.
inline MatchSet ransac_filter(const MatchSet& ms, const FeatureSet& prev, const FeatureSet& curr,
                              const RansacConfig& cfg = {}) {
  const auto res = ransac_homography(ms.correspondences(prev, curr), cfg);
  MatchSet out;
  out.evaluations = ms.evaluations;
  for (std::size_t i : res.inliers) out.pairs.push_back(ms.pairs[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Normalized cross-correlation

/// Zero-mean normalized cross-correlation at every offset where the template
/// fits inside the target. Entry (y, x) is the score with the template's
/// top-left corner at (x, y). Zero-variance windows score 0.
inline Eigen::MatrixXd ncc_map(const GrayImage& tmpl, const GrayImage& target) {
  const int tw = tmpl.width(), th = tmpl.height();
  if (tw > target.width() || th > target.height() ||
      (tw == target.width() && th == target.height())) {
    throw Error(ErrorCode::TemplateTooLarge, "template must be smaller than target");
  }
  const int ow = target.width() - tw + 1;
  const int oh = target.height() - th + 1;
  const double n = static_cast<double>(tw) * th;

  double tmean = 0.0;
  for (double v : tmpl.pixels()) tmean += v;
  tmean /= n;
  Eigen::MatrixXd tz(th, tw);
  double tss = 0.0;
  for (int y = 0; y < th; ++y) {
    for (int x = 0; x < tw; ++x) {
      tz(y, x) = tmpl.at(x, y) - tmean;
      tss += tz(y, x) * tz(y, x);
    }
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(oh, ow);
  if (tss <= 1e-12 * n) return out;

  // Summed-area tables for window sums.
  const int W = target.width(), H = target.height();
  Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(H + 1, W + 1);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(H + 1, W + 1);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double v = target.at(x, y);
      s1(y + 1, x + 1) = v + s1(y, x + 1) + s1(y + 1, x) - s1(y, x);
      s2(y + 1, x + 1) = v * v + s2(y, x + 1) + s2(y + 1, x) - s2(y, x);
    }
  }
  Eigen::MatrixXd tgt(H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) tgt(y, x) = target.at(x, y);
  }
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double sum = s1(oy + th, ox + tw) - s1(oy, ox + tw) - s1(oy + th, ox) + s1(oy, ox);
      const double sq = s2(oy + th, ox + tw) - s2(oy, ox + tw) - s2(oy + th, ox) + s2(oy, ox);
      const double var = sq - sum * sum / n;
      if (var <= 1e-12 * n) continue;
      // The template is zero-mean, so the window mean drops out of the numerator.
      const double num = (tgt.block(oy, ox, th, tw).array() * tz.array()).sum();
      out(oy, ox) = std::clamp(num / std::sqrt(var * tss), -1.0, 1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

/// CSV: src_idx,dst_idx,src_x,src_y,dst_x,dst_y,ssd
inline void write_matches(std::ostream& os, const MatchSet& ms, const FeatureSet& prev,
                          const FeatureSet& curr) {
  std::ostringstream s;
  s.precision(17);
  s << "src_idx,dst_idx,src_x,src_y,dst_x,dst_y,ssd\n";
  for (const auto& m : ms.pairs) {
    const Point2 a = prev.positions[m.src];
    const Point2 b = curr.positions[m.dst];
    s << m.src << ',' << m.dst << ',' << a.x << ',' << a.y << ',' << b.x << ',' << b.y << ','
      << m.ssd << '\n';
  }
  os << s.str();
}

/// Whitespace-separated rows; missing entries are written as `nan`.
inline void write_ssd_matrix(std::ostream& os, const SsdMatrix& m) {
  std::ostringstream s;
  s.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) s << ' ';
      if (is_missing(m(r, c))) {
        s << "nan";
      } else {
        s << m(r, c);
      }
    }
    s << '\n';
  }
  os << s.str();
}

}  // namespace feedreg

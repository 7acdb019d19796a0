#pragma once

// Closed-loop registration of consecutive frames.
//
// The loop carries a translation prior (dx, dy) and a gate radius r from one
// frame pair to the next: each pair is matched inside gates placed by the
// prior, and the mean displacement of the resulting matches becomes the
// prior for the following pair.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "feedreg/error.hpp"
#include "feedreg/features.hpp"
#include "feedreg/geometry.hpp"
#include "feedreg/image.hpp"
#include "feedreg/matching.hpp"

namespace feedreg {

/// Physical acquisition parameters: web speed (m/s, signed), frame rate (1/s)
/// and pixel scale (m/px).
struct MotionPrior {
  double speed = 0.0;
  double fps = 1.0;
  double pixel_scale = 1.0;

  void validate() const {
    if (!(fps > 0.0)) throw Error(ErrorCode::InvalidPrior, "frame rate must be > 0");
    if (!(pixel_scale > 0.0)) throw Error(ErrorCode::InvalidPrior, "pixel scale must be > 0");
  }
};

/// Truncated-normal model of the web speed on (lower, upper).
struct SpeedUncertainty {
  double mu = 0.0;
  double sigma = 1.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double coverage = 0.95;

  void validate() const {
    if (!(lower < upper)) throw Error(ErrorCode::InvalidPrior, "speed bounds must satisfy a < b");
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidPrior, "speed sigma must be > 0");
    if (!(lower <= mu && mu <= upper)) throw Error(ErrorCode::InvalidPrior, "speed mean outside bounds");
    if (!(coverage > 0.0 && coverage < 1.0)) {
      throw Error(ErrorCode::InvalidPrior, "coverage must lie in (0, 1)");
    }
  }
};

/// Per-frame pixel displacement implied by the physical parameters; dy starts at 0.
inline TranslationModel initial_offset(const MotionPrior& p) {
  p.validate();
  return {p.speed / (p.fps * p.pixel_scale), 0.0};
}

/// Gate radius from the extreme speed deviation: |dx| * rel_uncertainty.
inline double radius_worst_case(double dx, double rel_uncertainty) {
  if (!(rel_uncertainty > 0.0 && rel_uncertainty < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "relative uncertainty must lie in (0, 1)");
  }
  return std::abs(dx) * rel_uncertainty;
}

inline double standard_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double truncated_normal_pdf(const SpeedUncertainty& u, double x) {
  if (!(x > u.lower && x < u.upper)) return 0.0;
  const double mass = standard_normal_cdf((u.upper - u.mu) / u.sigma) -
                      standard_normal_cdf((u.lower - u.mu) / u.sigma);
  return standard_normal_pdf((x - u.mu) / u.sigma) / (u.sigma * mass);
}

inline double truncated_normal_cdf(const SpeedUncertainty& u, double x) {
  if (x <= u.lower) return 0.0;
  if (x >= u.upper) return 1.0;
  const double fa = standard_normal_cdf((u.lower - u.mu) / u.sigma);
  const double fb = standard_normal_cdf((u.upper - u.mu) / u.sigma);
  return (standard_normal_cdf((x - u.mu) / u.sigma) - fa) / (fb - fa);
}

/// Smallest radius whose symmetric speed interval [mu - delta, mu + delta]
/// holds `coverage` of the truncated-normal mass, converted to pixels.
/// Unfloored; callers apply their minimum radius.
inline double radius_coverage(const SpeedUncertainty& u, const MotionPrior& p) {
  u.validate();
  p.validate();
  auto mass = [&](double delta) {
    return truncated_normal_cdf(u, u.mu + delta) - truncated_normal_cdf(u, u.mu - delta);
  };
  double hi = std::max(u.upper - u.mu, u.mu - u.lower);
  if (!std::isfinite(hi)) {
    hi = u.sigma;
    while (mass(hi) < u.coverage) hi *= 2.0;
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) >= u.coverage) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi / (p.fps * p.pixel_scale);
}

// ---------------------------------------------------------------------------
// Loop state

struct PairRecord {
  double dx = 0.0;
  double dy = 0.0;
  std::size_t n_matches = 0;
  std::optional<double> rmse;
  bool flagged = false;
};

struct FeedbackState {
  double dx = 0.0;
  double dy = 0.0;
  double r = 3.0;
  std::size_t frame_index = 0;
  std::vector<PairRecord> history;

  TranslationModel translation() const { return {dx, dy}; }
};

struct FeedbackConfig {
  std::size_t min_matches = 8;
  double r_min = 3.0;
  bool use_median = false;
  /// When false the loop is open: the initial prior is reused for every pair.
  bool enabled = true;
};

inline FeedbackState make_state(const TranslationModel& initial, double radius,
                                const FeedbackConfig& cfg = {}) {
  if (!std::isfinite(initial.dx) || !std::isfinite(initial.dy) || !std::isfinite(radius)) {
    throw Error(ErrorCode::InvalidPrior, "initial state must be finite");
  }
  FeedbackState s;
  s.dx = initial.dx;
  s.dy = initial.dy;
  s.r = std::max(radius, cfg.r_min);
  return s;
}

/// Folds one pair's correspondences into the prior. Updates are rejected (and
/// the pair flagged) when there are fewer than min_matches pairs or when the
/// new estimate moves farther than r from the current prior.
inline FeedbackState update_state(FeedbackState s, const CorrespondenceSet& matches,
                                  const FeedbackConfig& cfg = {},
                                  std::optional<double> pair_rmse = std::nullopt) {
  PairRecord rec;
  rec.n_matches = matches.size();
  rec.rmse = pair_rmse;
  if (matches.size() < std::max<std::size_t>(cfg.min_matches, 1)) {
    rec.flagged = true;
  } else if (cfg.enabled) {
    const TranslationModel t =
        cfg.use_median ? estimate_translation_median(matches) : estimate_translation(matches);
    if (std::hypot(t.dx - s.dx, t.dy - s.dy) > s.r) {
      rec.flagged = true;
    } else {
      s.dx = t.dx;
      s.dy = t.dy;
    }
  }
  rec.dx = s.dx;
  rec.dy = s.dy;
  s.history.push_back(rec);
  ++s.frame_index;
  return s;
}

// ---------------------------------------------------------------------------
// Registration

enum class MatchMethod { Gated, LowestSsd };

struct RegistrationConfig {
  ExtractorConfig extractor = blob_extractor_config();
  double threshold = 1.0;  ///< descriptor SSD acceptance threshold
  MatchMethod method = MatchMethod::Gated;
  SsdKernel kernel = SsdKernel::Vectorized;
  FeedbackConfig feedback{};
};

struct PairResult {
  MatchSet matches;
  Homography homography;  ///< maps the current frame into the previous one
  FeedbackState state;
};

/// Matches one pair of feature sets with the state's prior, fits the pair
/// homography and feeds the result back into the state.
inline PairResult register_pair(const FeatureSet& prev, const FeatureSet& curr,
                                const FeedbackState& state, const RegistrationConfig& cfg) {
  PairResult out;
  if (cfg.method == MatchMethod::Gated) {
    out.matches = match_gated(prev, curr, state.translation(), {state.r, cfg.threshold}, cfg.kernel);
  } else {
    out.matches = match_lowest_ssd(prev, curr, cfg.threshold, cfg.kernel);
  }
  const CorrespondenceSet c = out.matches.correspondences(prev, curr);
  std::optional<Homography> h;
  if (c.size() >= 4) {
    try {
      h = estimate_homography_dlt(c);
    } catch (const Error&) {
      h.reset();
    }
  }
  out.state = update_state(state, c, cfg.feedback);
  out.homography = h ? *h : out.state.translation().to_homography();
  if (!c.empty()) out.state.history.back().rmse = rmse(c, out.homography);
  return out;
}

inline PairResult register_pair(const GrayImage& prev, const GrayImage& curr,
                                const FeedbackState& state, const RegistrationConfig& cfg) {
  return register_pair(extract(prev, cfg.extractor), extract(curr, cfg.extractor), state, cfg);
}

struct SequenceResult {
  std::vector<FeatureSet> features;  ///< one per frame, extracted once
  std::vector<MatchSet> matches;     ///< matches[k-1] for pair (k-1, k)
  std::vector<Homography> homographies;
  FeedbackState state;

  /// Sum of the per-pair translations the loop settled on.
  TranslationModel accumulated_translation() const {
    TranslationModel t;
    for (const auto& h : state.history) {
      t.dx += h.dx;
      t.dy += h.dy;
    }
    return t;
  }
};

inline SequenceResult register_features(std::vector<FeatureSet> features,
                                        const TranslationModel& initial, double radius,
                                        const RegistrationConfig& cfg) {
  if (features.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "registration needs at least two frames");
  }
  SequenceResult res;
  res.state = make_state(initial, radius, cfg.feedback);
  for (std::size_t k = 1; k < features.size(); ++k) {
    PairResult pr = register_pair(features[k - 1], features[k], res.state, cfg);
    res.matches.push_back(std::move(pr.matches));
    res.homographies.push_back(pr.homography);
    res.state = std::move(pr.state);
  }
  res.features = std::move(features);
  return res;
}

inline SequenceResult register_sequence(const std::vector<GrayImage>& images,
                                        const TranslationModel& initial, double radius,
                                        const RegistrationConfig& cfg) {
  if (images.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "registration needs at least two frames");
  }
  for (const auto& img : images) {
    if (img.width() != images.front().width() || img.height() != images.front().height()) {
      throw Error(ErrorCode::InvalidArgument, "frames have inconsistent dimensions");
    }
  }
  std::vector<FeatureSet> features;
  features.reserve(images.size());
  for (const auto& img : images) features.push_back(extract(img, cfg.extractor));
  return register_features(std::move(features), initial, radius, cfg);
}

/// Derives the initial prior from physical parameters. The radius comes from
/// the truncated-normal coverage when a speed model is given, else from a 10%
/// worst-case speed deviation.
inline SequenceResult register_sequence(const std::vector<GrayImage>& images, const MotionPrior& prior,
                                        const std::optional<SpeedUncertainty>& speed,
                                        const RegistrationConfig& cfg) {
  const TranslationModel t0 = initial_offset(prior);
  const double r = speed ? radius_coverage(*speed, prior) : radius_worst_case(t0.dx, 0.1);
  return register_sequence(images, t0, r, cfg);
}

/// CSV trace: frame,dx,dy,r,n_matches,rmse,flagged
inline void write_trace(std::ostream& os, const FeedbackState& s) {
  std::ostringstream o;
  o.precision(10);
  o << "frame,dx,dy,r,n_matches,rmse,flagged\n";
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    const auto& h = s.history[i];
    o << i + 1 << ',' << h.dx << ',' << h.dy << ',' << s.r << ',' << h.n_matches << ',';
    if (h.rmse) {
      o << *h.rmse;
    } else {
      o << "nan";
    }
    o << ',' << (h.flagged ? 1 : 0) << '\n';
  }
  os << o.str();
}

}  // namespace feedreg

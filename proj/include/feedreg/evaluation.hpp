#pragma once

// Accuracy metrics against synthetic ground truth, match-count ratios and
// matcher timing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "feedreg/error.hpp"
#include "feedreg/features.hpp"
#include "feedreg/geometry.hpp"
#include "feedreg/matching.hpp"
#include "feedreg/synthetic.hpp"

namespace feedreg {

inline constexpr double kCenterGate = 5.0;

struct CenterReport {
  std::optional<double> error;  ///< mean distance of detected centers; absent when none
  double ratio = 0.0;           ///< detected centers / ground-truth correspondences
  std::size_t detected = 0;
};

/// A matched source point counts as a detected center when it lies within
/// `gate` of a ground-truth center of the previous frame. Each ground-truth
/// center is claimed at most once, assigning closest pairs first.
inline CenterReport detected_centers(const CorrespondenceSet& matches, const std::vector<Point2>& gt_centers,
                                     std::size_t gt_correspondences, double gate = kCenterGate) {
  struct Cand {
    double d;
    std::size_t m;
    std::size_t g;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    for (std::size_t j = 0; j < gt_centers.size(); ++j) {
      const double d = distance(matches[i].prev, gt_centers[j]);
      if (d <= gate) cands.push_back({d, i, j});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
  std::vector<bool> used_m(matches.size(), false);
  std::vector<bool> used_g(gt_centers.size(), false);
  CenterReport rep;
  double acc = 0.0;
  for (const auto& c : cands) {
    if (used_m[c.m] || used_g[c.g]) continue;
    used_m[c.m] = used_g[c.g] = true;
    acc += c.d;
    ++rep.detected;
  }
  if (rep.detected) rep.error = acc / static_cast<double>(rep.detected);
  if (gt_correspondences) rep.ratio = static_cast<double>(rep.detected) / static_cast<double>(gt_correspondences);
  return rep;
}

/// Detected-center metrics for pair (k-1, k) of a generated sequence.
inline CenterReport detected_centers(const CorrespondenceSet& matches, const GroundTruth& gt,
                                     std::size_t pair_index, double gate = kCenterGate) {
  std::vector<Point2> centers;
  for (const auto& c : gt.centers.at(pair_index)) centers.push_back(c.center);
  return detected_centers(matches, centers, gt.pairs.at(pair_index).size(), gate);
}

/// RMSE of `matches` under the homography fitted by DLT to the ground-truth pairs.
inline double rmse_report(const CorrespondenceSet& matches, const CorrespondenceSet& gt_pairs) {
  if (gt_pairs.size() < 4) {
    throw Error(ErrorCode::InsufficientPairs, "ground truth needs at least 4 pairs");
  }
  return rmse(matches, estimate_homography_dlt(gt_pairs));
}

/// |other| / |baseline| in percent, one entry per other set.
inline std::vector<double> count_report(std::size_t baseline, const std::vector<std::size_t>& others) {
  if (baseline == 0) throw Error(ErrorCode::EmptyBaseline, "baseline match set is empty");
  std::vector<double> out;
  for (auto n : others) out.push_back(100.0 * static_cast<double>(n) / static_cast<double>(baseline));
  return out;
}

inline std::vector<double> count_report(const MatchSet& baseline, const std::vector<MatchSet>& others) {
  std::vector<std::size_t> n;
  for (const auto& m : others) n.push_back(m.size());
  return count_report(baseline.size(), n);
}

// ---------------------------------------------------------------------------
// Timing

struct MethodTiming {
  std::string method;
  double median_seconds = 0.0;
  std::uint64_t evaluations = 0;
  std::size_t matches = 0;
};

struct TimingReport {
  std::size_t descriptors_prev = 0;
  std::size_t descriptors_curr = 0;
  std::vector<MethodTiming> methods;

  const MethodTiming* find(const std::string& name) const {
    for (const auto& m : methods) {
      if (m.method == name) return &m;
    }
    return nullptr;
  }
};

namespace detail {

template <typename Fn>
MethodTiming time_method(const std::string& name, int reps, Fn&& fn) {
  std::vector<double> secs;
  MatchSet last;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    last = fn();
    const auto t1 = std::chrono::steady_clock::now();
    secs.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(secs.begin(), secs.end());
  MethodTiming t;
  t.method = name;
  t.median_seconds = std::max(secs[secs.size() / 2], 1e-12);
  t.evaluations = last.evaluations;
  t.matches = last.size();
  return t;
}

}  // namespace detail

inline const std::vector<std::string>& bench_method_names() {
  static const std::vector<std::string> names = {"loop-lowest-ssd", "loop-lowest-ssd+ransac", "loop-gated",
                                                 "vectorized-lowest-ssd", "vectorized-gated"};
  return names;
}

/// Median wall-clock per method over `repetitions` sequential runs, plus exact
/// SSD evaluation counts.
inline TimingReport bench_matchers(const FeatureSet& prev, const FeatureSet& curr, const TranslationModel& prior,
                                   const GateConfig& gate, int repetitions,
                                   const std::vector<std::string>& methods = bench_method_names()) {
  if (repetitions < 3) throw Error(ErrorCode::InvalidArgument, "benchmark needs at least 3 repetitions");
  TimingReport rep;
  rep.descriptors_prev = prev.size();
  rep.descriptors_curr = curr.size();
  for (const auto& name : methods) {
    if (name == "loop-lowest-ssd") {
      rep.methods.push_back(detail::time_method(name, repetitions, [&] {
        return match_lowest_ssd(prev, curr, gate.threshold, SsdKernel::Loop);
      }));
    } else if (name == "loop-lowest-ssd+ransac") {
      rep.methods.push_back(detail::time_method(name, repetitions, [&] {
        MatchSet ms = match_lowest_ssd(prev, curr, gate.threshold, SsdKernel::Loop);
        if (ms.size() < 4) return ms;
        try {
          return ransac_filter(ms, prev, curr);
        } catch (const Error&) {
          return MatchSet{{}, ms.evaluations};
        }
      }));
    } else if (name == "loop-gated") {
      rep.methods.push_back(detail::time_method(name, repetitions, [&] {
        return match_gated(prev, curr, prior, gate, SsdKernel::Loop);
      }));
    } else if (name == "vectorized-lowest-ssd") {
      rep.methods.push_back(detail::time_method(name, repetitions, [&] {
        return match_lowest_ssd(prev, curr, gate.threshold, SsdKernel::Vectorized);
      }));
    } else if (name == "vectorized-gated") {
      rep.methods.push_back(detail::time_method(name, repetitions, [&] {
        return match_gated(prev, curr, prior, gate, SsdKernel::Vectorized);
      }));
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown benchmark method '" + name + "'");
    }
  }
  return rep;
}

/// CSV: method,median_seconds,evaluations,matches,n_prev,n_curr
inline void write_timing(std::ostream& os, const TimingReport& r) {
  std::ostringstream o;
  o.precision(10);
  o << "method,median_seconds,evaluations,matches,n_prev,n_curr\n";
  for (const auto& m : r.methods) {
    o << m.method << ',' << m.median_seconds << ',' << m.evaluations << ',' << m.matches << ','
      << r.descriptors_prev << ',' << r.descriptors_curr << '\n';
  }
  os << o.str();
}

}  // namespace feedreg

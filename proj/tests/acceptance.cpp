// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "feedreg/feedreg.hpp"

using namespace feedreg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

FeatureSet random_features(std::mt19937_64& rng, int n, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  FeatureSet fs;
  fs.descriptors.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    fs.positions.push_back({static_cast<double>(i), 0.0});
    for (int t = 0; t < dim; ++t) fs.descriptors(i, t) = g(rng);
  }
  fs.normalized = false;
  return fs;
}

// 1. Vectorized SSD matrix agrees with the loop kernel.
Outcome vectorization_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 500);
  const int dims[] = {2, 64, 128, 256};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = dims[trial % 4];
    const FeatureSet a = random_features(rng, size(rng), dim);
    const FeatureSet b = random_features(rng, size(rng), dim);
    const SsdMatrix l = ssd_matrix_loop(a.descriptors, b.descriptors);
    const SsdMatrix v = ssd_matrix_vectorized(a.descriptors, b.descriptors);
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.cols(); ++j) {
        const double rel = std::abs(v(i, j) - l(i, j)) / std::max(std::abs(l(i, j)), 1e-300);
        worst = std::max(worst, rel);
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-6 && t < 30.0, fmt("max relative error %.3e, %.1f s", worst, t)};
}

// 2. Gated evaluation count grows linearly, the full matrix quadratically.
Outcome complexity_counts() {
  const auto t0 = Clock::now();
  const int ns[] = {200, 800, 3200};
  std::vector<double> n_src, gated, full;
  for (int n : ns) {
    KeypointSceneSpec s;
    s.frames = 2;
    s.width = s.height = static_cast<int>(std::lround(std::sqrt(n / s.density)));
    s.mean_motion = {10.0, 0.0};
    s.seed = 17;
    const KeypointScene scene = generate_keypoint_scene(s);
    const auto& a = scene.frames[0];
    const auto& b = scene.frames[1];
    const MatchSet g = match_gated(a, b, scene.true_motion[0], {10.0, 1.0});
    const MatchSet f = match_lowest_ssd(a, b, 1.0);
    n_src.push_back(static_cast<double>(a.size()));
    gated.push_back(static_cast<double>(g.evaluations));
    full.push_back(static_cast<double>(f.evaluations));
  }
  bool ok = true;
  std::ostringstream d;
  for (std::size_t i = 1; i < n_src.size(); ++i) {
    const double growth = n_src[i] / n_src[0];
    const double lin = (gated[i] / gated[0]) / growth;
    const double quad = (full[i] / full[0]) / (growth * growth);
    ok = ok && lin <= 1.3 && lin >= 1.0 / 1.3 && quad <= 1.3 && quad >= 1.0 / 1.3;
    d << fmt("n=%.0f gated/linear %.3f full/quadratic %.3f; ", n_src[i], lin, quad);
  }
  const double t = seconds_since(t0);
  d << fmt("%.1f s", t);
  return {ok && t < 60.0, d.str()};
}

// 3. Vectorized matcher at least twice as fast as the loop matcher.
Outcome vectorization_speedup() {
  const auto t0 = Clock::now();
  KeypointSceneSpec s;
  s.frames = 2;
  s.dim = 256;
  s.width = s.height = 700;  // about 1200 keypoints per frame
  s.mean_motion = {10.0, 0.0};
  const KeypointScene scene = generate_keypoint_scene(s);
  const TimingReport rep = bench_matchers(scene.frames[0], scene.frames[1], scene.true_motion[0], {10.0, 1.0}, 5,
                                          {"loop-lowest-ssd", "vectorized-lowest-ssd"});
  const double loop = rep.find("loop-lowest-ssd")->median_seconds;
  const double vec = rep.find("vectorized-lowest-ssd")->median_seconds;
  const double t = seconds_since(t0);
  const bool big = rep.descriptors_prev >= 1000 && rep.descriptors_curr >= 1000;
  return {big && loop / vec >= 2.0 && t < 60.0,
          fmt("n=%zu x %zu, loop %.4f s, vectorized %.4f s, speedup %.2fx, %.1f s", rep.descriptors_prev,
              rep.descriptors_curr, loop, vec, loop / vec, t)};
}

// 4. Reference pipeline accuracy on the three shape datasets.
Outcome synthetic_accuracy() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream d;
  for (double factor : {0.5, 1.0}) {
    for (auto shape : {PatternShape::Square, PatternShape::Circle, PatternShape::Hexagon}) {
      const GridSpec g = GridSpec::for_shape(shape);
      const Sequence seq = generate_sequence(g, DistortionSpec{factor, 2024}, NoiseSpec{});
      const SequenceResult res = register_sequence(seq.images, g.motion, 10.0, RegistrationConfig{});
      double worst_err = 0.0, worst_rmse = 0.0;
      for (std::size_t k = 0; k < res.matches.size(); ++k) {
        const auto c = res.matches[k].correspondences(res.features[k], res.features[k + 1]);
        const CenterReport cr = detected_centers(c, seq.truth, k);
        worst_err = std::max(worst_err, cr.error.value_or(std::numeric_limits<double>::infinity()));
        worst_rmse = std::max(worst_rmse, c.empty() ? std::numeric_limits<double>::infinity()
                                                     : rmse_report(c, seq.truth.pairs[k]));
      }
      ok = ok && worst_err < 2.0 && worst_rmse < 3.5;
      d << fmt("%s@%.1f err %.2f rmse %.2f; ", to_string(shape).c_str(), factor, worst_err, worst_rmse);
    }
  }
  const double t = seconds_since(t0);
  d << fmt("%.1f s", t);
  return {ok && t < 300.0, d.str()};
}

// 5. Identical cells fool global matching but not the gate.
Outcome ambiguity_separation() {
  const auto t0 = Clock::now();
  GridSpec g = GridSpec::for_shape(PatternShape::Circle);
  g.frames = 2;
  const Sequence seq = generate_sequence(g, DistortionSpec{0.0, 5}, NoiseSpec{});
  const ExtractorConfig ec = blob_extractor_config();
  const FeatureSet a = extract(seq.images[0], ec);
  const FeatureSet b = extract(seq.images[1], ec);
  auto correct_share = [&](const MatchSet& ms) {
    if (ms.empty()) return 0.0;
    std::size_t good = 0;
    for (const auto& c : ms.correspondences(a, b)) {
      const Point2 moved = c.prev - c.curr;
      good += std::hypot(moved.x - g.motion.dx, moved.y - g.motion.dy) <= 3.0 ? 1 : 0;
    }
    return static_cast<double>(good) / static_cast<double>(ms.size());
  };
  const double global = correct_share(match_lowest_ssd(a, b, 1.0));
  const double gated = correct_share(match_gated(a, b, g.motion, {10.0, 1.0}));
  const double t = seconds_since(t0);
  const bool cells = seq.truth.centers[0].size() >= 4;
  return {cells && global < 0.6 && gated > 0.9 && t < 30.0,
          fmt("%zu cells, lowest-ssd %.1f%% correct, gated %.1f%% correct, %.1f s", seq.truth.centers[0].size(),
              100.0 * global, 100.0 * gated, t)};
}

// 6. Feedback keeps the accumulated translation closer to the truth than a
// fixed prior.
Outcome closed_loop_drift() {
  const auto t0 = Clock::now();
  int wins = 0;
  double mean_closed = 0.0, mean_open = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    KeypointSceneSpec s;
    s.frames = 20;
    s.mean_motion = {60.0, 0.0};
    s.motion_sigma = 2.0;
    s.motion_clip = 0.1;
    s.seed = 1000 + static_cast<std::uint64_t>(trial);
    const KeypointScene scene = generate_keypoint_scene(s);
    TranslationModel truth;
    for (const auto& m : scene.true_motion) {
      truth.dx += m.dx;
      truth.dy += m.dy;
    }
    RegistrationConfig cfg;
    const TranslationModel t_closed = register_features(scene.frames, s.mean_motion, 15.0, cfg).accumulated_translation();
    cfg.feedback.enabled = false;
    const TranslationModel t_open = register_features(scene.frames, s.mean_motion, 15.0, cfg).accumulated_translation();
    const double e_closed = std::hypot(t_closed.dx - truth.dx, t_closed.dy - truth.dy);
    const double e_open = std::hypot(t_open.dx - truth.dx, t_open.dy - truth.dy);
    wins += e_closed < e_open ? 1 : 0;
    mean_closed += e_closed / 100.0;
    mean_open += e_open / 100.0;
  }
  const double t = seconds_since(t0);
  return {wins >= 95 && t < 300.0, fmt("feedback better in %d/100 trials, mean error %.3f px vs %.3f px, %.1f s",
                                       wins, mean_closed, mean_open, t)};
}

// 7. DLT recovers noiseless homographies.
Outcome dlt_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> px(0.0, 400.0);
  std::uniform_int_distribution<int> count(8, 40);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::Matrix3d m;
    m << 1.0 + 0.3 * u(rng), 0.3 * u(rng), 50.0 * u(rng),
         0.3 * u(rng), 1.0 + 0.3 * u(rng), 50.0 * u(rng),
         1e-4 * u(rng), 1e-4 * u(rng), 1.0;
    const Homography h(m);
    CorrespondenceSet c;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const Point2 q{px(rng), px(rng)};
      c.push_back({apply(h, q), q});
    }
    worst = std::max(worst, rmse(c, estimate_homography_dlt(c)));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-6 && t < 30.0, fmt("max recovery RMSE %.3e px, %.1f s", worst, t)};
}

// 8. Truncated-normal density and the coverage radius.
Outcome truncated_normal() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_mass = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    SpeedUncertainty s;
    s.mu = 0.5 + 2.0 * u(rng);
    s.sigma = 0.01 + 0.5 * u(rng);
    s.lower = s.mu - (0.05 + 2.0 * u(rng));
    s.upper = s.mu + (0.05 + 2.0 * u(rng));
    // Composite Simpson over (a, b).
    const int n = 20000;
    const double h = (s.upper - s.lower) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double x = std::clamp(s.lower + i * h, std::nextafter(s.lower, s.upper), std::nextafter(s.upper, s.lower));
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * truncated_normal_pdf(s, x);
    }
    worst_mass = std::max(worst_mass, std::abs(acc * h / 3.0 - 1.0));
  }

  // Roll-to-roll style prior: 60 px per frame, speed within +/-10%.
  const MotionPrior prior{0.6, 10.0, 0.001};
  SpeedUncertainty s{0.6, 0.03, 0.54, 0.66, 0.5};
  bool monotone = true;
  double last = 0.0;
  for (double cov : {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999}) {
    s.coverage = cov;
    const double r = radius_coverage(s, prior);
    monotone = monotone && r >= last;
    last = r;
  }
  s.coverage = 1.0 - 1e-12;
  const double limit = radius_coverage(s, prior);
  const double worst_case = radius_worst_case(initial_offset(prior).dx, 0.1);
  const double t = seconds_since(t0);
  return {worst_mass < 1e-6 && monotone && std::abs(limit - worst_case) < 1.0,
          fmt("max |mass - 1| %.2e, monotone %s, limit radius %.4f px vs worst case %.4f px, %.2f s", worst_mass,
              monotone ? "yes" : "no", limit, worst_case, t)};
}

// 9. NCC of an undeformed cell template peaks at several grid offsets.
Outcome ncc_ambiguity() {
  const auto t0 = Clock::now();
  GridSpec g = GridSpec::for_shape(PatternShape::Circle);
  g.frames = 2;
  const Sequence seq = generate_sequence(g, DistortionSpec{1.0, 9}, NoiseSpec{});
  const GrayImage tmpl = render_template(g, 25);
  const Eigen::MatrixXd map = ncc_map(tmpl, seq.images[0]);
  // Distinct peaks: local maxima above 0.7, at least half a pitch apart.
  struct Peak {
    double v;
    int x, y;
  };
  std::vector<Peak> cand;
  for (Eigen::Index y = 0; y < map.rows(); ++y) {
    for (Eigen::Index x = 0; x < map.cols(); ++x) {
      if (map(y, x) > 0.7) cand.push_back({map(y, x), static_cast<int>(x), static_cast<int>(y)});
    }
  }
  std::sort(cand.begin(), cand.end(), [](const Peak& a, const Peak& b) { return a.v > b.v; });
  std::vector<Peak> peaks;
  for (const auto& c : cand) {
    const bool near = std::any_of(peaks.begin(), peaks.end(), [&](const Peak& p) {
      return std::hypot(p.x - c.x, p.y - c.y) < 0.5 * g.pitch;
    });
    if (!near) peaks.push_back(c);
  }
  const double t = seconds_since(t0);
  return {peaks.size() >= 2 && t < 30.0,
          fmt("%zu distinct offsets above 0.7 (max %.3f), %.1f s", peaks.size(), map.maxCoeff(), t)};
}

// 10. Panorama ghosting grows with injected translation error.
Outcome ghosting_monotone() {
  const auto t0 = Clock::now();
  GridSpec g = GridSpec::for_shape(PatternShape::Square);
  g.frames = 6;
  const Sequence seq = generate_sequence(g, DistortionSpec{0.5, 10}, NoiseSpec{});
  std::vector<double> values;
  for (double e : {0.0, 2.0, 5.0, 10.0}) {
    std::vector<Homography> hs(seq.images.size() - 1, TranslationModel{g.motion.dx + e, g.motion.dy}.to_homography());
    values.push_back(ghosting(seq.images, hs).overall);
  }
  bool ok = true;
  for (std::size_t i = 1; i < values.size(); ++i) ok = ok && values[i] >= values[i - 1];
  const double t = seconds_since(t0);
  return {ok && t < 120.0, fmt("ghosting %.4f, %.4f, %.4f, %.4f at 0, 2, 5, 10 px, %.1f s", values[0], values[1],
                               values[2], values[3], t)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"vectorized SSD equals loop SSD", vectorization_equivalence},
      {"gated count linear, full count quadratic", complexity_counts},
      {"vectorized matcher >= 2x faster", vectorization_speedup},
      {"synthetic accuracy, error < 2 px and RMSE < 3.5 px", synthetic_accuracy},
      {"ambiguity separation on identical cells", ambiguity_separation},
      {"closed loop beats open loop on drift", closed_loop_drift},
      {"DLT recovers noiseless homographies", dlt_correctness},
      {"truncated normal mass and coverage radius", truncated_normal},
      {"NCC map has repeated peaks", ncc_ambiguity},
      {"ghosting nondecreasing in injected error", ghosting_monotone},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

// feedreg: dataset generation, registration, stitching, evaluation and
// benchmarking from the command line.
//
// Exit codes: 0 success, 2 input or spec error, 3 every pair flagged, 4 I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "feedreg/feedreg.hpp"

namespace fs = std::filesystem;
using namespace feedreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitFlagged = 3;
constexpr int kExitIo = 4;

bool g_verbose = false;

void note(const std::string& msg) {
  if (g_verbose) std::cerr << msg << '\n';
}

std::string numbered(const std::string& stem, std::size_t k, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", k);
  return stem + "_" + buf + ext;
}

// ---------------------------------------------------------------------------
// key=value files (config and manifests)

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

KeyValues read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return kv;
}

std::vector<std::string> values_of(const KeyValues& kv, const std::string& key) {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv) {
    if (k == key) out.push_back(v);
  }
  return out;
}

std::optional<std::string> value_of(const KeyValues& kv, const std::string& key) {
  auto v = values_of(kv, key);
  if (v.empty()) return std::nullopt;
  return v.back();
}

double number_of(const KeyValues& kv, const std::string& key, const fs::path& src) {
  const auto v = value_of(kv, key);
  if (!v) throw Error(ErrorCode::Parse, src.string() + ": missing key '" + key + "'");
  try {
    return std::stod(*v);
  } catch (const std::exception&) {
    throw Error(ErrorCode::Parse, src.string() + ": bad number for '" + key + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream s;
  fn(s);
  write_text(path, s.str());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

GrayImage load_frame(const fs::path& p) {
  if (!fs::exists(p)) throw Error(ErrorCode::InvalidArgument, "missing frame file " + p.string());
  return read_pgm(p.string());
}

// A dataset manifest written by `gen`, or a plain list of frames.
struct Dataset {
  fs::path dir;
  KeyValues kv;
  std::vector<fs::path> frames;
  std::vector<fs::path> centers;
  std::vector<fs::path> gt_pairs;

  bool has_truth() const { return !gt_pairs.empty(); }
};

Dataset load_dataset(const std::string& manifest) {
  Dataset d;
  const fs::path mp(manifest);
  if (!fs::exists(mp)) throw Error(ErrorCode::InvalidArgument, "missing manifest " + manifest);
  d.dir = mp.parent_path();
  d.kv = read_key_values(mp);
  for (const auto& f : values_of(d.kv, "frame")) d.frames.push_back(d.dir / f);
  for (const auto& f : values_of(d.kv, "centers")) d.centers.push_back(d.dir / f);
  for (const auto& f : values_of(d.kv, "gt_pairs")) d.gt_pairs.push_back(d.dir / f);
  if (d.frames.size() < 2) throw Error(ErrorCode::InvalidArgument, manifest + ": needs at least two frames");
  return d;
}

std::vector<Point2> read_centers(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  std::vector<Point2> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Point2 q;
    if (!(ls >> q.x >> q.y)) throw Error(ErrorCode::Parse, "bad center in " + p.string());
    out.push_back(q);
  }
  return out;
}

CorrespondenceSet read_pairs(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  return read_correspondences(in);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ExtractorConfig extractor_for(const std::string& detector) {
  if (detector == "blob") return blob_extractor_config();
  if (detector == "harris") return ExtractorConfig{};
  throw Error(ErrorCode::InvalidArgument, "detector: expected blob or harris, got '" + detector + "'");
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenArgs {
  std::string shape = "square";
  double cell = 0.0;
  double pitch = 60.0;
  int width = 400;
  int height = 400;
  int frames = 20;
  double motion_dx = 60.0;
  double motion_dy = 60.0;
  double factor = 0.0;
  int blur_mask = 7;
  double sp_density = 0.05;
  double awgn_variance = 0.02;
  bool no_noise = false;
};

int cmd_gen(const GenArgs& a, const fs::path& out, std::uint64_t seed) {
  GridSpec g = GridSpec::for_shape(parse_shape(a.shape));
  if (a.cell > 0.0) g.cell_param = a.cell;
  g.pitch = a.pitch;
  g.width = a.width;
  g.height = a.height;
  g.frames = a.frames;
  g.motion = {a.motion_dx, a.motion_dy};
  DistortionSpec d;
  d.factor = a.factor;
  d.seed = detail::derive_seed(seed, {1});
  NoiseSpec n = a.no_noise ? NoiseSpec::none() : NoiseSpec{a.blur_mask, a.sp_density, a.awgn_variance};
  n.seed = detail::derive_seed(seed, {2});
  g.validate();
  d.validate();
  n.validate();

  ensure_dir(out);
  const Sequence seq = generate_sequence(g, d, n);
  std::ostringstream m;
  m << std::setprecision(17);
  m << "shape=" << to_string(g.shape) << "\ncell_param=" << g.cell_param << "\npitch=" << g.pitch
    << "\nwidth=" << g.width << "\nheight=" << g.height << "\nframes=" << g.frames << "\nmotion_dx=" << g.motion.dx
    << "\nmotion_dy=" << g.motion.dy << "\nfactor=" << d.factor << "\ndistortion_seed=" << d.seed
    << "\nblur_mask=" << n.gaussian_blur_mask << "\nsp_density=" << n.sp_density
    << "\nawgn_variance=" << n.awgn_variance << "\nnoise_seed=" << n.seed << "\nseed=" << seed << '\n';
  for (std::size_t k = 0; k < seq.images.size(); ++k) {
    const std::string frame = numbered("frame", k, ".pgm");
    write_with(out / frame, [&](std::ostream& os) { write_pgm(os, seq.images[k]); });
    const std::string centers = numbered("centers", k, ".csv");
    write_with(out / centers, [&](std::ostream& os) {
      os << std::setprecision(17) << "x,y\n";
      for (const auto& c : seq.truth.centers[k]) os << c.center.x << ',' << c.center.y << '\n';
    });
    m << "frame=" << frame << "\ncenters=" << centers << '\n';
    if (k > 0) {
      const std::string pairs = numbered("gt_pairs", k, ".csv");
      write_with(out / pairs, [&](std::ostream& os) { write_correspondences(os, seq.truth.pairs[k - 1]); });
      m << "gt_pairs=" << pairs << '\n';
    }
  }
  write_text(out / "manifest", m.str());
  std::cout << "wrote " << seq.images.size() << " frames to " << out.string() << '\n';
  return kExitOk;
}

struct RegisterArgs {
  std::string manifest;
  std::vector<std::string> frames;
  std::optional<double> dx0;
  double dy0 = 0.0;
  std::optional<double> speed;
  double fps = 1.0;
  double pixel_scale = 1.0;
  std::optional<double> speed_sigma;
  std::optional<double> radius;
  std::optional<double> coverage;
  std::string method = "gated";
  std::string detector = "blob";
  double threshold = 1.0;
  bool open_loop = false;
  bool median = false;
};

int cmd_register(const RegisterArgs& a, const fs::path& out) {
  std::vector<fs::path> paths;
  KeyValues kv;
  fs::path src = a.manifest;
  if (!a.manifest.empty()) {
    Dataset d = load_dataset(a.manifest);
    paths = d.frames;
    kv = d.kv;
  } else {
    for (const auto& f : a.frames) paths.emplace_back(f);
  }
  if (paths.size() < 2) throw Error(ErrorCode::InvalidArgument, "register needs a manifest or at least two frames");

  std::vector<GrayImage> images;
  for (const auto& p : paths) images.push_back(load_frame(p));

  RegistrationConfig cfg;
  cfg.extractor = extractor_for(a.detector);
  cfg.threshold = a.threshold;
  cfg.feedback.enabled = !a.open_loop;
  cfg.feedback.use_median = a.median;
  if (a.method == "gated") {
    cfg.method = MatchMethod::Gated;
  } else if (a.method == "lowest-ssd") {
    cfg.method = MatchMethod::LowestSsd;
  } else {
    throw Error(ErrorCode::InvalidArgument, "method: expected gated or lowest-ssd, got '" + a.method + "'");
  }

  // Prior: explicit offset, else physical parameters, else the dataset's nominal motion.
  TranslationModel t0;
  double r = 10.0;
  if (a.dx0) {
    t0 = {*a.dx0, a.dy0};
    r = radius_worst_case(t0.dx == 0.0 ? 1.0 : t0.dx, 0.1);
  } else if (a.speed) {
    const MotionPrior prior{*a.speed, a.fps, a.pixel_scale};
    t0 = initial_offset(prior);
    const double v = std::abs(*a.speed);
    if (a.coverage) {
      SpeedUncertainty u{*a.speed, a.speed_sigma.value_or(0.05 * v), *a.speed - 0.1 * v, *a.speed + 0.1 * v,
                         *a.coverage};
      r = radius_coverage(u, prior);
    } else {
      r = radius_worst_case(t0.dx, 0.1);
    }
  } else if (!kv.empty()) {
    t0 = {number_of(kv, "motion_dx", src), number_of(kv, "motion_dy", src)};
  } else {
    throw Error(ErrorCode::InvalidArgument, "no motion prior: pass --dx0 or --speed");
  }
  if (a.radius) r = *a.radius;
  note("prior dx=" + std::to_string(t0.dx) + " dy=" + std::to_string(t0.dy) + " r=" + std::to_string(r));

  const SequenceResult res = register_sequence(images, t0, r, cfg);

  ensure_dir(out);
  std::ostringstream sm;
  for (const auto& p : paths) sm << "frame=" << fs::absolute(p).string() << '\n';
  for (std::size_t k = 1; k < images.size(); ++k) {
    const auto& ms = res.matches[k - 1];
    write_with(out / numbered("matches", k, ".csv"),
               [&](std::ostream& os) { write_matches(os, ms, res.features[k - 1], res.features[k]); });
    const std::string hname = numbered("homography", k, ".txt");
    write_with(out / hname, [&](std::ostream& os) { write_homography(os, res.homographies[k - 1]); });
    sm << "homography=" << hname << '\n';
  }
  write_with(out / "trace.csv", [&](std::ostream& os) { write_trace(os, res.state); });
  write_text(out / "stitch_manifest", sm.str());

  std::size_t flagged = 0;
  double mean_dx = 0.0;
  for (const auto& h : res.state.history) {
    flagged += h.flagged ? 1 : 0;
    mean_dx += h.dx;
  }
  mean_dx /= static_cast<double>(res.state.history.size());
  std::cout << "pairs " << res.state.history.size() << "  flagged " << flagged << "  mean dx " << mean_dx
            << "  r " << res.state.r << '\n';
  return flagged == res.state.history.size() ? kExitFlagged : kExitOk;
}

struct StitchArgs {
  std::string manifest;
  std::string blend = "average";
};

int cmd_stitch(const StitchArgs& a, const fs::path& out) {
  const fs::path mp(a.manifest);
  if (!fs::exists(mp)) throw Error(ErrorCode::InvalidArgument, "missing manifest " + a.manifest);
  const KeyValues kv = read_key_values(mp);
  std::vector<GrayImage> images;
  for (const auto& f : values_of(kv, "frame")) images.push_back(load_frame(mp.parent_path() / f));
  std::vector<Homography> hs;
  for (const auto& f : values_of(kv, "homography")) {
    const fs::path p = mp.parent_path() / f;
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::InvalidArgument, "missing homography file " + p.string());
    hs.push_back(read_homography(in));
  }
  BlendMode mode = BlendMode::Average;
  if (a.blend == "feather") {
    mode = BlendMode::Feather;
  } else if (a.blend != "average") {
    throw Error(ErrorCode::InvalidArgument, "blend: expected average or feather, got '" + a.blend + "'");
  }
  const Panorama pano = stitch(images, hs, mode);
  const GhostingReport g = ghosting(images, hs);
  ensure_dir(out);
  write_with(out / "panorama.pgm", [&](std::ostream& os) { write_pgm(os, pano.image); });
  write_with(out / "ghosting.csv", [&](std::ostream& os) { write_ghosting(os, g); });
  std::cout << "panorama " << pano.image.width() << "x" << pano.image.height() << " origin (" << pano.origin_x
            << ", " << pano.origin_y << ")  ghosting " << g.overall << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string manifest;
  std::string methods = "lowest-ssd,ransac,gated";
  std::string detector = "blob";
  double threshold = 1.0;
  double radius = 10.0;
};

int cmd_eval(const EvalArgs& a, const fs::path& out) {
  const Dataset d = load_dataset(a.manifest);
  const auto methods = split_list(a.methods);
  for (const auto& m : methods) {
    if (m != "lowest-ssd" && m != "ransac" && m != "gated") {
      throw Error(ErrorCode::InvalidArgument, "methods: unknown method '" + m + "'");
    }
  }
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "methods: empty selection");
  const TranslationModel prior{number_of(d.kv, "motion_dx", a.manifest), number_of(d.kv, "motion_dy", a.manifest)};
  const ExtractorConfig ec = extractor_for(a.detector);
  const GateConfig gate{a.radius, a.threshold};
  gate.validate();

  std::vector<FeatureSet> feats;
  for (const auto& p : d.frames) feats.push_back(extract(load_frame(p), ec));

  std::ostringstream csv;
  csv << std::setprecision(10) << "pair,method,matches,percent_of_lowest_ssd,center_error,center_ratio,rmse\n";
  std::map<std::string, std::pair<double, std::size_t>> pct_sum;
  for (std::size_t k = 1; k < feats.size(); ++k) {
    const auto& prev = feats[k - 1];
    const auto& curr = feats[k];
    const MatchSet base = match_lowest_ssd(prev, curr, a.threshold);
    std::vector<MatchSet> sets;
    for (const auto& m : methods) {
      if (m == "lowest-ssd") {
        sets.push_back(base);
      } else if (m == "ransac") {
        MatchSet r;
        try {
          r = ransac_filter(base, prev, curr);
        } catch (const Error&) {
        }
        sets.push_back(r);
      } else {
        sets.push_back(match_gated(prev, curr, prior, gate));
      }
    }
    std::vector<double> pct(methods.size(), std::numeric_limits<double>::quiet_NaN());
    if (!base.empty()) pct = count_report(base, sets);

    std::optional<CorrespondenceSet> truth;
    std::vector<Point2> centers;
    if (d.has_truth() && k - 1 < d.gt_pairs.size() && k - 1 < d.centers.size()) {
      truth = read_pairs(d.gt_pairs[k - 1]);
      centers = read_centers(d.centers[k - 1]);
    }
    for (std::size_t i = 0; i < methods.size(); ++i) {
      csv << k << ',' << methods[i] << ',' << sets[i].size() << ',' << pct[i] << ',';
      if (truth) {
        const auto c = sets[i].correspondences(prev, curr);
        const CenterReport cr = detected_centers(c, centers, truth->size());
        csv << (cr.error ? *cr.error : std::numeric_limits<double>::quiet_NaN()) << ',' << cr.ratio << ',';
        csv << (c.empty() || truth->size() < 4 ? std::numeric_limits<double>::quiet_NaN() : rmse_report(c, *truth));
      } else {
        csv << "nan,nan,nan";
      }
      csv << '\n';
      if (!std::isnan(pct[i])) {
        pct_sum[methods[i]].first += pct[i];
        ++pct_sum[methods[i]].second;
      }
    }
  }
  ensure_dir(out);
  write_text(out / "eval.csv", csv.str());
  std::cout << std::left << std::setw(14) << "method" << "mean % of lowest-ssd\n";
  for (const auto& m : methods) {
    const auto& s = pct_sum[m];
    std::cout << std::left << std::setw(14) << m << std::fixed << std::setprecision(1)
              << (s.second ? s.first / static_cast<double>(s.second) : 0.0) << '\n';
  }
  return kExitOk;
}

struct BenchArgs {
  std::string manifest;
  std::string methods;
  std::string detector = "blob";
  std::size_t pair = 1;
  int reps = 5;
  double threshold = 1.0;
  double radius = 10.0;
};

int cmd_bench(const BenchArgs& a, const fs::path& out) {
  const Dataset d = load_dataset(a.manifest);
  if (a.pair < 1 || a.pair >= d.frames.size()) {
    throw Error(ErrorCode::InvalidArgument, "pair: must lie in [1, " + std::to_string(d.frames.size() - 1) + "]");
  }
  const ExtractorConfig ec = extractor_for(a.detector);
  const FeatureSet prev = extract(load_frame(d.frames[a.pair - 1]), ec);
  const FeatureSet curr = extract(load_frame(d.frames[a.pair]), ec);
  const TranslationModel prior{number_of(d.kv, "motion_dx", a.manifest), number_of(d.kv, "motion_dy", a.manifest)};
  const auto methods = a.methods.empty() ? bench_method_names() : split_list(a.methods);
  const TimingReport rep = bench_matchers(prev, curr, prior, {a.radius, a.threshold}, a.reps, methods);
  ensure_dir(out);
  write_with(out / "timing.csv", [&](std::ostream& os) { write_timing(os, rep); });
  std::cout << std::left << std::setw(26) << "method" << std::setw(16) << "median_s" << std::setw(14)
            << "evaluations" << "matches\n";
  for (const auto& m : rep.methods) {
    std::cout << std::left << std::setw(26) << m.method << std::setw(16) << m.median_seconds << std::setw(14)
              << m.evaluations << m.matches << '\n';
  }
  return kExitOk;
}

// Config keys become `--key=value` arguments of the selected subcommand unless
// the same flag was given on the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const CLI::App& app) {
  std::string cfg_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) cfg_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) cfg_path = args[i].substr(9);
  }
  if (cfg_path.empty()) return args;
  const KeyValues kv = read_key_values(cfg_path);

  std::size_t sub_pos = args.size();
  const CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size() && !sub; ++i) {
    for (const CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; })) {
      if (s->get_name() == args[i]) {
        sub = s;
        sub_pos = i;
        break;
      }
    }
  }
  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(), [&](const std::string& s) {
      return s == flag || s.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> globals;
  std::vector<std::string> locals;
  for (const auto& [key, value] : kv) {
    const std::string flag = "--" + key;
    const bool global = key != "config" && app.get_option_no_throw(flag) != nullptr;
    const bool local = sub && sub->get_option_no_throw(flag) != nullptr;
    if (!global && !local) throw Error(ErrorCode::Parse, cfg_path + ": unknown key '" + key + "'");
    if (given(key)) continue;
    (local ? locals : globals).push_back(flag + "=" + value);
  }
  std::vector<std::string> merged(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(std::min(sub_pos, args.size())));
  merged.insert(merged.end(), globals.begin(), globals.end());
  if (sub_pos < args.size()) {
    merged.push_back(args[sub_pos]);
    merged.insert(merged.end(), locals.begin(), locals.end());
    merged.insert(merged.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
  }
  return merged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop feedback registration of moving-web image sequences", "feedreg"};
  app.require_subcommand(1);
  std::string config;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  app.add_option("--config", config, "flat key=value file; command-line flags take precedence");
  app.add_option("--out-dir", out_dir, "directory for all outputs");
  app.add_option("--seed", seed, "master seed");
  app.add_flag("--verbose", g_verbose, "progress on stderr");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic grid-pattern sequence");
  g->add_option("--shape", gen.shape, "square, circle or hexagon");
  g->add_option("--cell", gen.cell, "square side or circle/hexagon radius (0 = shape default)");
  g->add_option("--pitch", gen.pitch);
  g->add_option("--width", gen.width);
  g->add_option("--height", gen.height);
  g->add_option("--frames", gen.frames);
  g->add_option("--motion-dx", gen.motion_dx);
  g->add_option("--motion-dy", gen.motion_dy);
  g->add_option("--factor", gen.factor, "local distortion factor");
  g->add_option("--blur-mask", gen.blur_mask);
  g->add_option("--sp-density", gen.sp_density);
  g->add_option("--awgn-variance", gen.awgn_variance);
  g->add_flag("--no-noise", gen.no_noise);

  RegisterArgs reg;
  auto* r = app.add_subcommand("register", "register a frame sequence with the feedback loop");
  r->add_option("--manifest", reg.manifest);
  r->add_option("--frames", reg.frames, "frame files, used when no manifest is given");
  r->add_option("--dx0", reg.dx0);
  r->add_option("--dy0", reg.dy0);
  r->add_option("--speed", reg.speed, "web speed, m/s");
  r->add_option("--fps", reg.fps);
  r->add_option("--pixel-scale", reg.pixel_scale, "m/px");
  r->add_option("--speed-sigma", reg.speed_sigma, "speed std, m/s (default 5% of speed)");
  r->add_option("--radius", reg.radius, "gate radius in px; overrides derivation");
  r->add_option("--coverage", reg.coverage, "probability mass for the derived radius");
  r->add_option("--method", reg.method, "gated or lowest-ssd");
  r->add_option("--detector", reg.detector, "blob or harris");
  r->add_option("--threshold", reg.threshold, "SSD acceptance threshold");
  r->add_flag("--open-loop", reg.open_loop, "keep the initial prior for every pair");
  r->add_flag("--median", reg.median, "median displacement feedback");

  StitchArgs st;
  auto* s = app.add_subcommand("stitch", "stitch registered frames into a panorama");
  s->add_option("--manifest", st.manifest)->required();
  s->add_option("--blend", st.blend, "average or feather");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "compare matchers against the lowest-SSD baseline");
  e->add_option("--manifest", ev.manifest)->required();
  e->add_option("--methods", ev.methods);
  e->add_option("--detector", ev.detector);
  e->add_option("--threshold", ev.threshold);
  e->add_option("--radius", ev.radius);

  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "time the matchers on one frame pair");
  b->add_option("--manifest", bn.manifest)->required();
  b->add_option("--methods", bn.methods);
  b->add_option("--detector", bn.detector);
  b->add_option("--pair", bn.pair);
  b->add_option("--reps", bn.reps);
  b->add_option("--threshold", bn.threshold);
  b->add_option("--radius", bn.radius);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& ex) {
    const int rc = app.exit(ex);
    return rc == 0 ? kExitOk : kExitInput;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return ex.code() == ErrorCode::Io ? kExitIo : kExitInput;
  }

  const fs::path out(out_dir);
  try {
    if (*g) return cmd_gen(gen, out, seed);
    if (*r) return cmd_register(reg, out);
    if (*s) return cmd_stitch(st, out);
    if (*e) return cmd_eval(ev, out);
    if (*b) return cmd_bench(bn, out);
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return ex.code() == ErrorCode::Io ? kExitIo : kExitInput;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

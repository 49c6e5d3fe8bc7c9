#pragma once

// Command-line front end: warp, flow, fuse, gradcheck, eval and ingest.
//
// Exit codes: 0 success, 1 check failure, 2 configuration/usage, 3 I/O,
// 4 numeric degeneracy.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idwarp/flo_io.hpp"
#include "idwarp/geometry.hpp"
#include "idwarp/gradcheck.hpp"
#include "idwarp/image_io.hpp"
#include "idwarp/kitti_io.hpp"
#include "idwarp/losses.hpp"
#include "idwarp/pipeline.hpp"
#include "idwarp/reproject.hpp"

namespace idwarp::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kIo = 3, kDegenerate = 4 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return kIo;
    case ErrorKind::degenerate: return kDegenerate;
    case ErrorKind::config:
    case ErrorKind::shape: break;
  }
  return kUsage;
}

// Flat key=value configuration. Command-line flags override file values.
class RunConfig {
 public:
  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "focal", "cx",     "cy",    "motion", "poses",   "pose-i",     "pose-j",   "image",
        "depth", "output", "mask",  "winners", "backend", "iterations", "seed",     "lambda",
        "phi",   "exact",  "generated", "reference", "instances", "max-size"};
    return keys;
  }

  static std::string canonical(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::io, "cannot open config file '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorKind::config, path + ":" + std::to_string(line_no) + ": expected key = value");
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), path + ":" + std::to_string(line_no) + ": ");
    }
  }

  void set(const std::string& raw_key, const std::string& value, const std::string& where = "") {
    const std::string key = canonical(raw_key);
    if (!known_keys().count(key)) throw Error(ErrorKind::config, where + "unknown config key '" + raw_key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::config, "missing required key '" + key + "'");
    return it->second;
  }

  std::string str_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  double number(const std::string& key) const { return parse_number(key, str(key)); }

  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw Error(ErrorKind::config, key + ": expected an integer");
    return static_cast<int>(v);
  }

  bool flag(const std::string& key) const {
    if (!has(key)) return false;
    const std::string v = str(key);
    if (v == "1" || v == "true" || v == "yes" || v.empty()) return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw Error(ErrorKind::config, key + ": expected a boolean, got '" + v + "'");
  }

  CameraIntrinsics intrinsics() const {
    CameraIntrinsics k{number("focal"), number("cx"), number("cy")};
    if (!(k.f > 0.0)) throw Error(ErrorKind::config, "focal: must be positive");
    return k;
  }

  LossWeights weights() const {
    LossWeights w;
    if (has("lambda")) w.lambda = number("lambda");
    if (has("phi")) w.phi = number("phi");
    if (!(w.lambda >= 0.0)) throw Error(ErrorKind::config, "lambda: must be non-negative");
    if (!(w.phi >= 0.0)) throw Error(ErrorKind::config, "phi: must be non-negative");
    return w;
  }

  static double parse_number(const std::string& key, const std::string& text) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, key + ": expected a number, got '" + text + "'");
    }
  }

  // Six numbers "ox,oy,oz,tx,ty,tz" (radians, meters); commas or spaces.
  static EgoMotion parse_motion(const std::string& text) {
    std::string s = text;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream is(s);
    std::array<double, 6> v{};
    std::string tok;
    int n = 0;
    while (is >> tok) {
      if (n >= 6) throw Error(ErrorKind::config, "motion: expected 6 values, got more");
      v[n++] = parse_number("motion", tok);
    }
    if (n != 6) throw Error(ErrorKind::config, "motion: expected 6 values, got " + std::to_string(n));
    return EgoMotion::from_array(v);
  }

  // From `motion`, or from the pose pair (`poses`, `pose-i`, `pose-j`).
  EgoMotion motion() const {
    if (has("motion")) return parse_motion(str("motion"));
    if (has("poses")) {
      const auto poses = load_odometry_poses(str("poses"));
      const int i = integer("pose-i", -1), j = integer("pose-j", -1);
      for (auto [name, idx] : {std::pair{"pose-i", i}, std::pair{"pose-j", j}}) {
        if (idx < 0 || idx >= static_cast<int>(poses.size()))
          throw Error(ErrorKind::config, std::string(name) + ": index " + std::to_string(idx) +
                                             " out of range (file has " + std::to_string(poses.size()) + " poses)");
      }
      const RelativeMotion rel = relative_motion(poses[i], poses[j]);
      if (rel.degenerate) throw Error(ErrorKind::degenerate, "poses: relative rotation is at gimbal lock");
      return rel.motion;
    }
    throw Error(ErrorKind::config, "missing required key 'motion' (or 'poses' with 'pose-i' and 'pose-j')");
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline void warn_if_outside_envelope(const EgoMotion& m, std::ostream& err) {
  if (!within_validated_envelope(m))
    err << "warning: motion outside the validated envelope (|t_z| <= 7 m, |omega_y| <= 22 deg); "
           "continuing\n";
}

inline DepthImage load_depth_checked(const RunConfig& cfg) { return load_depth_png(cfg.str("depth")); }

inline int cmd_warp(const RunConfig& cfg, Streams io) {
  const CameraIntrinsics k = cfg.intrinsics();
  const EgoMotion m = cfg.motion();
  const WarpBackend backend = parse_backend(cfg.str_or("backend", "grid"));
  const int iterations = cfg.integer("iterations", 1);
  if (iterations < 0) throw Error(ErrorKind::config, "iterations: must be >= 0");
  const std::string output = cfg.str("output"), mask = cfg.str("mask");
  warn_if_outside_envelope(m, io.err);

  const FeatureMap image = read_image(cfg.str("image"));
  const DepthImage depth = load_depth_checked(cfg);
  const WarpOutput w = warp_view(image, depth, m, k, backend, iterations);
  write_image(output, w.image);
  write_mask(mask, w.holes, w.image.height, w.image.width);
  io.out << "holes\t" << w.hole_count() << "\n";
  return kOk;
}

inline int cmd_flow(const RunConfig& cfg, Streams io) {
  const CameraIntrinsics k = cfg.intrinsics();
  const EgoMotion m = cfg.motion();
  const bool exact = cfg.flag("exact");
  const std::string output = cfg.str("output");
  warn_if_outside_envelope(m, io.err);

  const DepthImage raw = load_depth_checked(cfg);
  bool sparse = false;
  for (double v : raw.meters) sparse = sparse || !(v > 0.0);
  const DepthImage depth = sparse ? densify_depth(raw) : raw;

  const FlowField approx = flow_field(metric_inverse_depth(depth), m, k);
  const FlowField truth = exact_flow_field(depth, motion_to_transform(m), k);
  double max_diff = 0.0;
  std::size_t compared = 0;
  for (std::size_t i = 0; i < approx.u.size(); ++i) {
    if (approx.status[i] != FlowStatus::complete || truth.status[i] != FlowStatus::complete) continue;
    max_diff = std::max(max_diff, (approx.u[i] - truth.u[i]).cwiseAbs().maxCoeff());
    ++compared;
  }
  write_flo(output, to_flo(exact ? truth : approx));
  io.out << "field\t" << (exact ? "exact" : "instantaneous") << "\n";
  io.out << std::setprecision(9) << "max_abs_diff\t" << max_diff << "\n";
  io.out << "compared_pixels\t" << compared << "\n";
  return kOk;
}

inline int cmd_fuse(const RunConfig& cfg, const std::vector<std::string>& images,
                    const std::vector<std::string>& depths, const std::vector<std::string>& motions, Streams io) {
  if (images.empty()) throw Error(ErrorKind::config, "image: at least one view is required");
  if (depths.size() != images.size() || motions.size() != images.size())
    throw Error(ErrorKind::config, "image/depth/motion: counts differ (" + std::to_string(images.size()) + "/" +
                                       std::to_string(depths.size()) + "/" + std::to_string(motions.size()) + ")");
  const CameraIntrinsics k = cfg.intrinsics();
  const WarpBackend backend = parse_backend(cfg.str_or("backend", "grid"));
  const int iterations = cfg.integer("iterations", 1);
  if (iterations < 0) throw Error(ErrorKind::config, "iterations: must be >= 0");
  const std::string output = cfg.str("output");

  std::vector<WarpOutput> warped;
  for (std::size_t v = 0; v < images.size(); ++v) {
    const EgoMotion m = RunConfig::parse_motion(motions[v]);
    warn_if_outside_envelope(m, io.err);
    const FeatureMap image = read_image(images[v]);
    if (!warped.empty() && !image.same_shape(warped.front().image))
      throw Error(ErrorKind::shape, "image: '" + images[v] + "' differs in size from the first view");
    warped.push_back(warp_view(image, load_depth_png(depths[v]), m, k, backend, iterations));
  }
  const FusedViews fused = fuse_warped(warped);
  write_image(output, fused.image);
  if (cfg.has("mask")) write_mask(cfg.str("mask"), fused.holes, fused.image.height, fused.image.width);
  if (cfg.has("winners")) {
    if (images.size() > 255) throw Error(ErrorKind::config, "winners: more than 255 views cannot be dumped");
    RawPng png;
    png.width = fused.winners.width;
    png.height = fused.winners.height;
    png.channels = fused.winners.channels;
    if (png.channels != 1 && png.channels != 3 && png.channels != 4)
      throw Error(ErrorKind::config, "winners: unsupported channel count");
    png.bytes.assign(fused.winners.index.begin(), fused.winners.index.end());
    write_png_raw(cfg.str("winners"), std::move(png));
  }
  for (std::size_t v = 0; v < fused.view_holes.size(); ++v)
    io.out << "view" << v << "_holes\t" << fused.view_holes[v] << "\n";
  io.out << "holes\t" << fused.hole_count() << "\n";
  return kOk;
}

inline int cmd_gradcheck(const RunConfig& cfg, const std::string& corrupt, Streams io) {
  GradcheckOptions opt;
  opt.seed = static_cast<std::uint64_t>(cfg.integer("seed", 0));
  opt.instances = cfg.integer("instances", 100);
  opt.max_size = cfg.integer("max-size", 16);
  opt.corrupt = corrupt;
  if (opt.instances < 1) throw Error(ErrorKind::config, "instances: must be >= 1");
  if (opt.max_size < 2) throw Error(ErrorKind::config, "max-size: must be >= 2");

  const auto reports = run_gradcheck(opt);
  bool ok = true;
  io.out << "seed\t" << opt.seed << "\n";
  for (const auto& r : reports) {
    char line[256];
    std::snprintf(line, sizeof line, "%-20s instances=%d checked=%ld skipped=%ld max_rel_error=%.3e tol=%.0e %s\n",
                  r.name.c_str(), r.instances, r.checked, r.skipped, r.max_rel_error, r.tolerance,
                  r.passed() ? "PASS" : "FAIL");
    io.out << line;
    ok = ok && r.passed();
  }
  if (!ok) {
    for (const auto& r : reports)
      if (!r.passed()) io.err << "gradient check failed: " << r.name << "\n";
    return kCheckFailed;
  }
  return kOk;
}

inline std::vector<std::string> list_pngs(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::io, "'" + dir + "' is not a directory");
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") names.push_back(e.path().filename().string());
  }
  if (ec) throw Error(ErrorKind::io, "cannot list '" + dir + "': " + ec.message());
  std::sort(names.begin(), names.end());
  return names;
}

inline int cmd_eval(const RunConfig& cfg, Streams io) {
  const std::string gen_dir = cfg.str("generated"), ref_dir = cfg.str("reference");
  const auto gen = list_pngs(gen_dir), ref = list_pngs(ref_dir);
  std::vector<std::string> unpaired;
  std::set_symmetric_difference(gen.begin(), gen.end(), ref.begin(), ref.end(), std::back_inserter(unpaired));
  if (!unpaired.empty()) {
    for (const auto& n : unpaired) io.err << "unpaired file: " << n << "\n";
    return kUsage;
  }
  if (gen.empty()) throw Error(ErrorKind::config, "generated: no PNG files found");

  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, double>> rows;
  double total = 0.0;
  std::size_t width = 4;
  for (const auto& name : gen) {
    const FeatureMap a = read_image((fs::path(gen_dir) / name).string());
    const FeatureMap b = read_image((fs::path(ref_dir) / name).string());
    if (!a.same_shape(b)) throw Error(ErrorKind::shape, name + ": generated and reference sizes differ");
    const double v = mean_pixel_l1(a, b);
    rows.emplace_back(name, v);
    total += v;
    width = std::max(width, name.size());
  }
  const double mean = total / rows.size();
  io.out << std::fixed << std::setprecision(9);
  io.out << std::left << std::setw(static_cast<int>(width)) << "name" << "  " << "mean_pixel_l1\n";
  for (const auto& [name, v] : rows) io.out << std::setw(static_cast<int>(width)) << name << "  " << v << "\n";
  io.out << std::setw(static_cast<int>(width)) << "mean" << "  " << mean << "\n";
  for (const auto& [name, v] : rows) io.out << name << "\t" << v << "\n";
  io.out << "mean\t" << mean << "\n";
  return kOk;
}

inline int cmd_ingest(const RunConfig& cfg, Streams io) {
  const EgoMotion m = cfg.motion();
  const auto v = m.to_array();
  static const char* names[6] = {"omega_x", "omega_y", "omega_z", "t_x", "t_y", "t_z"};
  io.out << std::setprecision(12);
  for (int i = 0; i < 6; ++i) io.out << names[i] << "\t" << v[i] << "\n";
  warn_if_outside_envelope(m, io.err);

  if (cfg.has("depth")) {
    const DepthImage depth = load_depth_png(cfg.str("depth"));
    std::vector<double> normalized;
    std::size_t valid = 0, too_near = 0;
    for (double z : depth.meters) {
      if (!(z > 0.0)) continue;
      ++valid;
      if (auto d = normalize_inverse_depth(z)) normalized.push_back(*d);
      else ++too_near;
    }
    const std::size_t total = depth.meters.size();
    io.out << "depth_pixels\t" << total << "\n";
    io.out << "depth_valid\t" << valid << "\n";
    io.out << std::setprecision(6) << "depth_valid_fraction\t" << (total ? double(valid) / total : 0.0) << "\n";
    io.out << "depth_below_1.5m\t" << too_near << "\n";
    std::sort(normalized.begin(), normalized.end());
    for (double q : {0.0, 0.05, 0.5, 0.95, 1.0}) {
      io.out << "inv_depth_p" << static_cast<int>(std::lround(q * 100)) << "\t";
      if (normalized.empty()) {
        io.out << "nan\n";
      } else {
        const std::size_t idx = static_cast<std::size_t>(std::lround(q * (normalized.size() - 1)));
        io.out << normalized[idx] << "\n";
      }
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inverse-depth view-warping toolkit", "idwarp"};
  app.require_subcommand(1);

  std::map<std::string, std::string> flags;
  std::string config_path;
  auto add_keys = [&](CLI::App* sub, std::initializer_list<const char*> keys) {
    sub->add_option("--config", config_path, "key=value configuration file");
    for (const char* key : keys) sub->add_option(std::string("--") + key, flags[key]);
  };

  CLI::App* warp = app.add_subcommand("warp", "Warp an image into a new view");
  add_keys(warp, {"focal", "cx", "cy", "motion", "poses", "pose-i", "pose-j", "image", "depth", "output", "mask",
                  "backend", "iterations", "seed"});

  CLI::App* flow = app.add_subcommand("flow", "Export the flow field as a .flo file");
  bool exact = false;
  add_keys(flow, {"focal", "cx", "cy", "motion", "poses", "pose-i", "pose-j", "depth", "output", "seed"});
  flow->add_flag("--exact", exact, "Write the exact reprojection field");

  CLI::App* fuse = app.add_subcommand("fuse", "Warp several views to the target and fuse by max selection");
  std::vector<std::string> images, depths, motions;
  add_keys(fuse, {"focal", "cx", "cy", "output", "mask", "winners", "backend", "iterations", "seed"});
  fuse->add_option("--image", images, "Input image (repeat per view)");
  fuse->add_option("--depth", depths, "Input depth PNG (repeat per view)");
  fuse->add_option("--motion", motions, "Motion to the target view (repeat per view)");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all analytic gradients");
  std::string corrupt;
  add_keys(gradcheck, {"seed", "instances", "max-size"});
  gradcheck->add_option("--corrupt", corrupt, "Test hook: perturb one component's gradient")->group("");

  CLI::App* eval = app.add_subcommand("eval", "Mean pixel L1 between two directories of PNGs");
  add_keys(eval, {"generated", "reference"});

  CLI::App* ingest = app.add_subcommand("ingest", "Control variables from a pose pair plus depth statistics");
  add_keys(ingest, {"poses", "pose-i", "pose-j", "motion", "depth"});

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [key, value] : flags)
      if (sub->get_option_no_throw("--" + key) && sub->count("--" + key) > 0) cfg.set(key, value);
    if (sub == flow && exact) cfg.set("exact", "true");
    cfg.weights();  // validates lambda/phi when present

    const Streams io{out, err};
    if (sub == warp) return cmd_warp(cfg, io);
    if (sub == flow) return cmd_flow(cfg, io);
    if (sub == fuse) return cmd_fuse(cfg, images, depths, motions, io);
    if (sub == gradcheck) return cmd_gradcheck(cfg, corrupt, io);
    if (sub == eval) return cmd_eval(cfg, io);
    if (sub == ingest) return cmd_ingest(cfg, io);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace idwarp::cli

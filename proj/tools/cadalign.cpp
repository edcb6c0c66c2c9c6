// cadalign command line: scene generation, correspondences, alignment,
// pruning and evaluation as separate pipeable steps, plus an e2e driver.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cadalign/cadalign.hpp"

namespace fs = std::filesystem;
using namespace cadalign;
using Json = nlohmann::json;

namespace {

struct RunConfig {
  // scene
  std::uint64_t seed = 0;
  int scenes = 1;
  int models = 5;
  int models_max = 0;  // e2e: scene i gets models + i % (models_max - models + 1)
  std::vector<std::string> generators;
  double extent = 0.0;
  double noise = 0.005;
  double voxel_size = 0.03;
  double truncation = 0.15;
  int views = 32;
  int image_width = 160;
  int image_height = 120;
  double focal = 120.0;
  double occlude_below = 0.0;
  // correspondences
  double sigma = 2.0;
  double match_radius = 0.09;
  double harris_k = 0.005;
  int harris_window = 2;
  double harris_nms = 0.15;
  int harris_max = 512;
  double harris_threshold = 0.0;
  // solver
  double lambda_s = 0.01;
  int pyramid_levels = 3;
  int max_iterations = 100;
  int yaw_fan = 4;
  double jitter_step = 0.15;
  double cluster_radius = 1.0;
  double inlier_value = 0.5;
  int min_inliers = 4;
  double min_new_fraction = 0.5;
  double max_scale_deviation = 0.5;
  bool trace = false;
  // pruning
  double tau = 0.15;
  double min_seen_fraction = 0.3;
  double min_separation = 0.3;
  // evaluation
  double t_t = 0.20;
  double t_r = 20.0;
  double t_s = 20.0;
  bool sort_by_confidence = false;
  std::string block = "rotation";
  std::vector<double> thresholds;
  // baselines
  int cmaes_generations = 500;
  int cmaes_population = 10;
  double cmaes_sigma = 0.5;
  int ransac_iterations = 2000;
  int ransac_top_k = 8;
  double ransac_inlier_radius = 0.2;
  double ransac_max_height_diff = 0.8;
  int ransac_max_models = 2;
  // voxelize
  std::string generator;
  std::uint64_t cad_seed = 0;
  // io
  std::string scene;
  std::string scan;
  std::string keypoints;
  std::string pairs;
  std::string alignments;
  std::string out = "out";
  int jobs = 1;
};

enum Group : unsigned {
  kScene = 1u << 0,
  kOracle = 1u << 1,
  kHarris = 1u << 2,
  kSolver = 1u << 3,
  kPrune = 1u << 4,
  kEval = 1u << 5,
  kSweep = 1u << 6,
  kCmaes = 1u << 7,
  kRansac = 1u << 8,
  kVoxelize = 1u << 9,
  kInScene = 1u << 10,
  kInScan = 1u << 11,
  kInKeypoints = 1u << 12,
  kInPairs = 1u << 13,
  kInAlignments = 1u << 14,
  kOut = 1u << 15,
  kJobs = 1u << 16,
  kAll = ~0u,
};

template <class F>
void each_field(RunConfig& c, unsigned g, F&& f) {
  if (g & kScene) {
    f("seed", c.seed, "scene seed; all randomness derives from it");
    f("scenes", c.scenes, "number of scenes (e2e)");
    f("models", c.models, "objects per scene");
    f("models_max", c.models_max, "e2e: cycle object counts from models to this value");
    f("generators", c.generators, "generators to draw from (Box Cylinder ChairLike TableLike LShelf)");
    f("extent", c.extent, "floor side length in meters, 0 picks one from the model count");
    f("noise", c.noise, "depth noise sigma in meters");
    f("voxel_size", c.voxel_size, "scan voxel size in meters");
    f("truncation", c.truncation, "TSDF truncation in meters");
    f("views", c.views, "rendered views fused into the scan");
    f("image_width", c.image_width, "depth image width");
    f("image_height", c.image_height, "depth image height");
    f("focal", c.focal, "focal length in pixels");
    f("occlude_below", c.occlude_below, "hide triangles lying entirely below this height");
  }
  if (g & kOracle) {
    f("sigma", c.sigma, "heatmap blur in voxels");
    f("match_radius", c.match_radius, "keypoint to surface match radius in meters");
  }
  if (g & kHarris) {
    f("harris_k", c.harris_k, "Harris trace weight");
    f("harris_window", c.harris_window, "structure tensor window radius in voxels");
    f("harris_nms", c.harris_nms, "non-maximum suppression radius in meters");
    f("harris_max", c.harris_max, "keypoint cap");
    f("harris_threshold", c.harris_threshold, "minimum response");
  }
  if (g & kSolver) {
    f("lambda_s", c.lambda_s, "scale regularizer weight");
    f("pyramid_levels", c.pyramid_levels, "coarse-to-fine heatmap levels");
    f("max_iterations", c.max_iterations, "LM iterations per level");
    f("yaw_fan", c.yaw_fan, "yaw initializations per restart");
    f("jitter_step", c.jitter_step, "restart jitter step in meters");
    f("cluster_radius", c.cluster_radius, "restart cluster radius in meters");
    f("inlier_value", c.inlier_value, "heatmap value counting a pair as explained");
    f("min_inliers", c.min_inliers, "pairs a candidate must newly explain");
    f("min_new_fraction", c.min_new_fraction, "share of a candidate's inliers that must be new");
    f("max_scale_deviation", c.max_scale_deviation, "allowed relative scale deviation from predictions");
    f("trace", c.trace, "write per-candidate solver traces as CSV");
  }
  if (g & kPrune) {
    f("tau", c.tau, "confidence truncation in meters");
    f("min_seen_fraction", c.min_seen_fraction, "minimum observed share of CAD voxels");
    f("min_separation", c.min_separation, "minimum distance between kept translations in meters");
  }
  if (g & kEval) {
    f("t_t", c.t_t, "translation threshold in meters");
    f("t_r", c.t_r, "rotation threshold in degrees");
    f("t_s", c.t_s, "scale threshold in percent");
    f("sort_by_confidence", c.sort_by_confidence, "evaluate candidates in confidence order");
  }
  if (g & kSweep) {
    f("block", c.block, "threshold block to sweep (translation|rotation|scale)");
    f("thresholds", c.thresholds, "ascending sweep thresholds; empty uses a default grid");
  }
  if (g & kCmaes) {
    f("cmaes_generations", c.cmaes_generations, "CMA-ES generation cap");
    f("cmaes_population", c.cmaes_population, "CMA-ES population size");
    f("cmaes_sigma", c.cmaes_sigma, "CMA-ES initial step size");
  }
  if (g & kRansac) {
    f("ransac_iterations", c.ransac_iterations, "RANSAC iterations");
    f("ransac_top_k", c.ransac_top_k, "descriptor matches per scan keypoint");
    f("ransac_inlier_radius", c.ransac_inlier_radius, "inlier radius in meters");
    f("ransac_max_height_diff", c.ransac_max_height_diff, "height gate for matches in meters");
    f("ransac_max_models", c.ransac_max_models, "instances searched per CAD model");
  }
  if (g & kVoxelize) {
    f("generator", c.generator, "voxelize one procedural model instead of a scene's CADs");
    f("cad_seed", c.cad_seed, "seed of that procedural model");
  }
  if (g & kInScene) f("scene", c.scene, "scene JSON");
  if (g & kInScan) f("scan", c.scan, "scan grid (.vgrid); defaults to the scene's scan");
  if (g & kInKeypoints) f("keypoints", c.keypoints, "keypoints JSON; empty runs Harris on the scan");
  if (g & kInPairs) f("pairs", c.pairs, "correspondence directory written by correspond");
  if (g & kInAlignments) f("alignments", c.alignments, "alignments JSON");
  if (g & kOut) f("out", c.out, "output directory");
  if (g & kJobs) f("jobs", c.jobs, "worker threads");
}

Json to_json(RunConfig c) {
  Json j = Json::object();
  each_field(c, kAll, [&](const char* name, auto& v, const char*) { j[name] = v; });
  return j;
}

// Keys of `patch` replace the corresponding fields; unknown keys are errors.
void apply_config_file(RunConfig& c, const fs::path& path) {
  const Json patch = parse_json_file(path);
  if (!patch.is_object()) fail(ErrorKind::Validation, "config '" + path.string() + "' must hold a JSON object");
  Json known = to_json(c);
  for (const auto& [key, value] : patch.items()) {
    if (key == "subcommand") continue;  // snapshots can be fed back in
    if (!known.contains(key))
      fail(ErrorKind::Validation, "unknown key '" + key + "' in config '" + path.string() + "'");
    known[key] = value;
  }
  with_json_errors(path, [&] {
    each_field(c, kAll, [&](const char* name, auto& v, const char*) {
      v = known.at(name).get<std::decay_t<decltype(v)>>();
    });
    return 0;
  });
}

void add_flags(CLI::App& app, RunConfig& c, unsigned groups) {
  each_field(c, groups, [&](const char* name, auto& v, const char* help) {
    std::string names = std::string("--") + name;
    std::string dashed = name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != name) names += ",--" + dashed;
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, bool>) {
      app.add_flag(names, v, help);
    } else if constexpr (std::is_same_v<T, std::vector<double>> ||
                         std::is_same_v<T, std::vector<std::string>>) {
      app.add_option(names, v, help)->delimiter(',');
    } else {
      app.add_option(names, v, help)->capture_default_str();
    }
  });
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) fail(ErrorKind::Validation, std::string("missing --") + flag + " (set the flag or the config key)");
}

void need_file(const std::string& path, const char* flag) {
  need(path, flag);
  if (!fs::exists(path))
    fail(ErrorKind::Validation, std::string("--") + flag + " file '" + path + "' does not exist");
}

void write_snapshot(const RunConfig& c, const std::string& sub) {
  Json j = to_json(c);
  j["subcommand"] = sub;
  fs::create_directories(c.out);
  detail::write_file(fs::path(c.out) / (sub + ".config.json"), dump(j));
}

SceneConfig scene_config(const RunConfig& c, int models, std::uint64_t seed) {
  SceneConfig s;
  s.scene_id = "scene_" + std::to_string(seed);
  s.models = models;
  if (!c.generators.empty()) {
    s.generators.clear();
    for (const auto& g : c.generators) s.generators.push_back(generator_from_string(g));
  }
  s.extent = c.extent;
  s.noise_sigma = c.noise;
  s.voxel_size = c.voxel_size;
  s.truncation = c.truncation;
  s.views = c.views;
  s.image_width = c.image_width;
  s.image_height = c.image_height;
  s.focal = c.focal;
  s.occlude_below = c.occlude_below;
  s.seed = seed;
  require(c.views >= 1, "views must be at least 1");
  return s;
}

PipelineConfig pipeline_config(const RunConfig& c) {
  PipelineConfig p;
  p.harris.k = c.harris_k;
  p.harris.window_radius = c.harris_window;
  p.harris.nms_radius = c.harris_nms;
  p.harris.max_count = c.harris_max;
  p.harris.threshold = c.harris_threshold;
  p.oracle.sigma = c.sigma;
  p.oracle.match_radius = c.match_radius;
  p.lambda_s = c.lambda_s;
  p.pyramid_levels = c.pyramid_levels;
  p.solver.max_iterations = c.max_iterations;
  p.solver.yaw_fan = c.yaw_fan;
  p.solver.jitter_step = c.jitter_step;
  p.solver.cluster_radius = c.cluster_radius;
  p.solver.record_trace = c.trace;
  p.solver.seed = c.seed;
  p.inlier_value = c.inlier_value;
  p.min_inliers = c.min_inliers;
  p.min_new_fraction = c.min_new_fraction;
  p.max_scale_deviation = c.max_scale_deviation;
  p.prune.tau = c.tau;
  p.prune.min_seen_fraction = c.min_seen_fraction;
  p.prune.min_separation = c.min_separation;
  p.eval.t_t = c.t_t;
  p.eval.t_r = c.t_r;
  p.eval.t_s = c.t_s;
  p.eval.sort_by_confidence = c.sort_by_confidence;
  p.jobs = c.jobs;
  require(c.jobs >= 1, "jobs must be at least 1");
  require(c.max_iterations >= 1, "max_iterations must be at least 1");
  require(c.yaw_fan >= 1, "yaw_fan must be at least 1");
  return p;
}

struct LoadedScene {
  fs::path path;
  SceneDescription desc;
  CadSet cads;
  std::vector<GroundTruthEntry> gt;
};

LoadedScene load_scene_with_cads(const RunConfig& c) {
  need_file(c.scene, "scene");
  LoadedScene s;
  s.path = c.scene;
  s.desc = load_scene(s.path);
  s.cads = build_cads(s.desc.cad_models);
  s.gt = ground_truth(s.desc);
  return s;
}

VoxelGrid load_scan(const RunConfig& c, const LoadedScene* scene) {
  fs::path p;
  if (!c.scan.empty()) {
    need_file(c.scan, "scan");
    p = c.scan;
  } else if (scene) {
    p = scene_scan_path(scene->path, scene->desc);
    if (!fs::exists(p)) fail(ErrorKind::Validation, "scan grid '" + p.string() + "' named by the scene does not exist");
  } else {
    need(c.scan, "scan");
  }
  VoxelGrid g = load_grid(p);
  require(g.kind == GridKind::SignedDF, "scan '" + p.string() + "' is not a signed distance grid");
  return g;
}

std::vector<Keypoint> keypoints_for(const RunConfig& c, const VoxelGrid& scan, const PipelineConfig& p) {
  if (c.keypoints.empty()) return detect_harris(scan, p.harris);
  need_file(c.keypoints, "keypoints");
  const Json j = parse_json_file(c.keypoints);
  return with_json_errors(c.keypoints, [&] { return keypoints_from_json(j); });
}

AlignmentCandidate from_aligned(const AlignedModel& m) {
  AlignmentCandidate c;
  c.cad_id = m.cad_id;
  c.pose = m.pose;
  c.params = params_from_matrix(m.pose);
  c.cost = m.cost;
  c.confidence = m.confidence;
  return c;
}

AlignmentSet to_set(const std::string& scene_id, const std::vector<AlignmentCandidate>& cands,
                    const CadSet& cads) {
  AlignmentSet a{scene_id, {}};
  for (const auto& c : cands) a.models.push_back(to_aligned(c, cads));
  return a;
}

void print_table(const EvalResult& r) {
  std::istringstream csv(eval_to_csv(r));
  std::string header, values;
  std::getline(csv, header);
  std::getline(csv, values);
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  const auto h = split(header), v = split(values);
  std::ostringstream a, b;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::string cell = i < v.size() && !v[i].empty() ? v[i] : "-";
    const int w = static_cast<int>(std::max(h[i].size(), cell.size())) + 2;
    a << std::setw(w) << h[i];
    b << std::setw(w) << cell;
  }
  std::cout << a.str() << "\n" << b.str() << "\n"
            << "correct " << r.num_correct << " / " << r.num_gt << "\n";
}

void write_eval(const fs::path& dir, const EvalResult& r) {
  detail::write_file(dir / "eval.json", dump(eval_to_json(r)));
  detail::write_file(dir / "eval.csv", eval_to_csv(r));
}

// ---- subcommands -------------------------------------------------------------

int cmd_gen_scene(const RunConfig& c) {
  const GeneratedScene g = generate_scene(scene_config(c, c.models, c.seed));
  const fs::path out(c.out);
  save_scene(out / "scene.json", g.description);
  save_grid(out / g.description.scan_path, g.scan);
  save_grid(out / (g.description.scene_id + "_weights.vgrid"), g.weights);
  std::cout << "wrote " << (out / "scene.json").string() << " with "
            << g.description.placed_models.size() << " models\n";
  return 0;
}

int cmd_voxelize(const RunConfig& c) {
  const fs::path out(c.out);
  if (!c.generator.empty()) {
    const Generator g = generator_from_string(c.generator);
    const CadModel m = build_cad(c.generator, g, c.cad_seed);
    const fs::path file = out / (c.generator + "_" + std::to_string(c.cad_seed) + ".vgrid");
    save_grid(file, m.df);
    std::cout << "wrote " << file.string() << "\n";
    return 0;
  }
  const LoadedScene s = load_scene_with_cads(c);
  fs::create_directories(out / "cads");
  for (const auto& [id, cad] : s.cads) save_grid(out / "cads" / (id + ".vgrid"), cad.df);
  std::cout << "wrote " << s.cads.size() << " distance fields to " << (out / "cads").string() << "\n";
  return 0;
}

int cmd_keypoints(const RunConfig& c) {
  const PipelineConfig p = pipeline_config(c);
  std::optional<LoadedScene> s;
  if (!c.scene.empty()) s = load_scene_with_cads(c);
  const VoxelGrid scan = load_scan(c, s ? &*s : nullptr);
  const auto kps = detect_harris(scan, p.harris);
  detail::write_file(fs::path(c.out) / "keypoints.json", dump(keypoints_to_json(kps)));
  std::cout << kps.size() << " keypoints\n";
  return 0;
}

int cmd_correspond(const RunConfig& c) {
  const PipelineConfig p = pipeline_config(c);
  const LoadedScene s = load_scene_with_cads(c);
  const VoxelGrid scan = load_scan(c, &s);
  const auto kps = keypoints_for(c, scan, p);
  const auto pairs = oracle_correspondences(positions(kps), s.gt, s.cads, p.oracle);
  save_pairs(fs::path(c.out) / "pairs", pairs);
  std::cout << pairs.size() << " pairs from " << kps.size() << " keypoints\n";
  return 0;
}

int cmd_align(const RunConfig& c) {
  const PipelineConfig p = pipeline_config(c);
  const LoadedScene s = load_scene_with_cads(c);
  need(c.pairs, "pairs");
  if (!fs::exists(fs::path(c.pairs) / "pairs.json"))
    fail(ErrorKind::Validation, "--pairs directory '" + c.pairs + "' has no pairs.json; run correspond first");
  const auto filtered = filter_correspondences(load_pairs(c.pairs));
  const auto cands = align_pairs_by_cad(filtered, s.cads, p);
  const fs::path out(c.out);
  save_alignments(out / "candidates.json", to_set(s.desc.scene_id, cands, s.cads));
  if (c.trace) {
    fs::create_directories(out / "traces");
    for (std::size_t i = 0; i < cands.size(); ++i)
      detail::write_file(out / "traces" / (std::to_string(i) + "_" + cands[i].cad_id + ".csv"),
                         trace_to_csv(cands[i].trace));
  }
  std::cout << cands.size() << " candidates from " << filtered.size() << " filtered pairs\n";
  return 0;
}

int cmd_align_pairs(const RunConfig& c) {
  const LoadedScene s = load_scene_with_cads(c);
  std::vector<AlignmentCandidate> cands(s.desc.placed_models.size());
  parallel_for(static_cast<int>(cands.size()), c.jobs, [&](int i) {
    const auto& m = s.desc.placed_models[i];
    PairAlignmentConfig pc;
    pc.max_generations = c.cmaes_generations;
    pc.population = c.cmaes_population;
    pc.sigma0 = c.cmaes_sigma;
    pc.seed = c.seed + static_cast<std::uint64_t>(i);
    const PairAlignment r = cmaes_solve_pairs(m.keypoint_pairs, pc);
    cands[i].cad_id = m.cad_id;
    cands[i].params = r.params;
    cands[i].pose = pose_to_matrix(r.params);
    cands[i].cost = r.rms;
  });
  save_alignments(fs::path(c.out) / "alignments.json", to_set(s.desc.scene_id, cands, s.cads));
  std::cout << cands.size() << " models aligned from keypoint pairs\n";
  return 0;
}

std::vector<DescribedKeypoint> describe_clamped(const VoxelGrid& grid, const std::vector<Vec3>& pts,
                                                double clamp) {
  auto d = describe(grid, pts);
  for (auto& k : d) k.descriptor = k.descriptor.cwiseAbs().cwiseMin(clamp);
  return d;
}

int cmd_ransac_align(const RunConfig& c) {
  const PipelineConfig p = pipeline_config(c);
  const LoadedScene s = load_scene_with_cads(c);
  const VoxelGrid scan = load_scan(c, &s);
  const auto scan_desc = describe_clamped(scan, positions(keypoints_for(c, scan, p)), c.truncation);
  std::vector<std::string> ids;
  for (const auto& [id, cad] : s.cads) ids.push_back(id);
  std::vector<std::vector<AlignmentCandidate>> per(ids.size());
  parallel_for(static_cast<int>(ids.size()), c.jobs, [&](int i) {
    const CadModel& cad = s.cads.at(ids[i]);
    const auto cad_desc = describe_clamped(cad.df, cad.mesh.vertices, c.truncation);
    const Aabb box = cad.mesh.bounds();
    RansacConfig rc;
    rc.iterations = c.ransac_iterations;
    rc.top_k = c.ransac_top_k;
    rc.inlier_radius = c.ransac_inlier_radius;
    rc.max_height_diff = c.ransac_max_height_diff;
    rc.max_models = c.ransac_max_models;
    rc.cad_box = OrientedBox::from_center_size(box.center(), box.extent());
    rc.cad_id = ids[i];
    rc.seed = c.seed + static_cast<std::uint64_t>(i);
    per[i] = ransac_align(scan_desc, cad_desc, Vec3::Ones(), rc).candidates;
  });
  std::vector<AlignmentCandidate> cands;
  for (auto& v : per)
    for (auto& x : v) cands.push_back(std::move(x));
  save_alignments(fs::path(c.out) / "alignments.json", to_set(s.desc.scene_id, cands, s.cads));
  std::cout << cands.size() << " RANSAC candidates\n";
  return 0;
}

int cmd_prune(const RunConfig& c) {
  const PipelineConfig p = pipeline_config(c);
  const LoadedScene s = load_scene_with_cads(c);
  const VoxelGrid scan = load_scan(c, &s);
  need_file(c.alignments, "alignments");
  std::vector<AlignmentCandidate> cands;
  for (const auto& m : load_alignments(c.alignments).models) cands.push_back(from_aligned(m));
  const std::size_t before = cands.size();
  const auto kept = prune(std::move(cands), scan, s.cads, p.prune);
  save_alignments(fs::path(c.out) / "alignments.json", to_set(s.desc.scene_id, kept, s.cads));
  std::cout << "kept " << kept.size() << " of " << before << " candidates\n";
  return 0;
}

int cmd_evaluate(const RunConfig& c) {
  const PipelineConfig p = pipeline_config(c);
  need_file(c.scene, "scene");
  need_file(c.alignments, "alignments");
  const SceneDescription desc = load_scene(c.scene);
  const EvalResult r = evaluate(load_alignments(c.alignments).models, ground_truth(desc), p.eval);
  write_eval(c.out, r);
  print_table(r);
  return 0;
}

std::vector<double> default_thresholds(SweepBlock b) {
  std::vector<double> t;
  switch (b) {
    case SweepBlock::Translation:
      for (int i = 0; i <= 50; ++i) t.push_back(0.01 * i);
      break;
    case SweepBlock::Rotation:
      for (int i = 0; i <= 45; ++i) t.push_back(i);
      break;
    case SweepBlock::Scale:
      for (int i = 0; i <= 50; ++i) t.push_back(i);
      break;
  }
  return t;
}

int cmd_sweep(const RunConfig& c) {
  const PipelineConfig p = pipeline_config(c);
  need_file(c.scene, "scene");
  need_file(c.alignments, "alignments");
  const SweepBlock b = sweep_block_from_string(c.block);
  const SceneDescription desc = load_scene(c.scene);
  const auto t = c.thresholds.empty() ? default_thresholds(b) : c.thresholds;
  const auto curve = threshold_sweep(load_alignments(c.alignments).models, ground_truth(desc), b, t, p.eval);
  const fs::path file = fs::path(c.out) / ("sweep_" + c.block + ".csv");
  detail::write_file(file, sweep_to_csv(curve, b));
  std::cout << "wrote " << file.string() << " (" << curve.size() << " points)\n";
  return 0;
}

int cmd_e2e(const RunConfig& c) {
  require(c.scenes >= 1, "scenes must be at least 1");
  require(c.models >= 0, "models must be non-negative");
  require(c.models_max == 0 || c.models_max >= c.models, "models_max must be 0 or at least models");
  PipelineConfig p = pipeline_config(c);
  const int span = c.models_max > 0 ? c.models_max - c.models + 1 : 1;
  const int outer = std::min(c.jobs, c.scenes);
  p.jobs = std::max(1, c.jobs / outer);
  std::vector<EvalResult> results(c.scenes);
  const fs::path out(c.out);
  parallel_for(c.scenes, outer, [&](int i) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
    const GeneratedScene g = generate_scene(scene_config(c, c.models + i % span, seed));
    const fs::path dir = out / g.description.scene_id;
    save_scene(dir / "scene.json", g.description);
    save_grid(dir / g.description.scan_path, g.scan);
    const SceneResult r = run_pipeline(g.scan, g.cads, ground_truth(g.description), p);
    save_alignments(dir / "candidates.json", to_set(g.description.scene_id, r.candidates, g.cads));
    save_alignments(dir / "alignments.json", AlignmentSet{g.description.scene_id, r.aligned});
    write_eval(dir, r.eval);
    results[i] = r.eval;
  });
  const EvalResult merged = c.scenes == 1 ? results.front() : merge_results(results);
  write_eval(out, merged);
  print_table(merged);
  return 0;
}

struct Subcommand {
  const char* name;
  const char* help;
  unsigned groups;
  int (*run)(const RunConfig&);
};

const Subcommand kSubcommands[] = {
    {"gen-scene", "generate a synthetic scene and fuse its scan", kScene | kOut, cmd_gen_scene},
    {"voxelize", "write CAD distance fields", kVoxelize | kInScene | kOut, cmd_voxelize},
    {"keypoints", "detect Harris keypoints on a scan", kHarris | kInScene | kInScan | kOut, cmd_keypoints},
    {"correspond", "oracle correspondences and heatmaps",
     kHarris | kOracle | kInScene | kInScan | kInKeypoints | kOut, cmd_correspond},
    {"align", "filter correspondences and run the heatmap solver per CAD",
     kSolver | kInScene | kInPairs | kOut | kJobs | kScene, cmd_align},
    {"align-pairs", "align each placed model from its keypoint pairs with CMA-ES",
     kCmaes | kInScene | kOut | kJobs | kScene, cmd_align_pairs},
    {"ransac-align", "descriptor RANSAC baseline",
     kRansac | kHarris | kInScene | kInScan | kInKeypoints | kOut | kJobs | kScene, cmd_ransac_align},
    {"prune", "confidence scoring and duplicate removal",
     kPrune | kInScene | kInScan | kInAlignments | kOut, cmd_prune},
    {"evaluate", "benchmark accuracy of alignments against the scene",
     kEval | kInScene | kInAlignments | kOut, cmd_evaluate},
    {"sweep", "accuracy as one threshold varies", kEval | kSweep | kInScene | kInAlignments | kOut,
     cmd_sweep},
    {"e2e", "generate, correspond, align, prune and evaluate",
     kScene | kOracle | kHarris | kSolver | kPrune | kEval | kOut | kJobs, cmd_e2e},
};

int exit_code(ErrorKind k) { return k == ErrorKind::Numerical ? 3 : 2; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAD to scan 9DoF alignment"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string config_file;
  app.add_option("--config", config_file, "JSON config; its keys override flags")
      ->check(CLI::ExistingFile);
  std::vector<std::pair<CLI::App*, const Subcommand*>> subs;
  for (const auto& s : kSubcommands) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_file, "JSON config; its keys override flags")
        ->check(CLI::ExistingFile);
    add_flags(*sub, cfg, s.groups);
    subs.push_back({sub, &s});
  }

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    std::string names;
    for (const auto& s : kSubcommands) {
      known = known || std::string(argv[1]) == s.name;
      names += names.empty() ? s.name : std::string(", ") + s.name;
    }
    if (!known) {
      std::cerr << "error: unknown subcommand '" << argv[1] << "' (expected one of: " << names << ")\n";
      return 2;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << " (see cadalign --help)\n";
    return 2;
  }

  for (const auto& [sub, spec] : subs) {
    if (!sub->parsed()) continue;
    try {
      if (!config_file.empty()) apply_config_file(cfg, config_file);
      write_snapshot(cfg, spec->name);
      return spec->run(cfg);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}

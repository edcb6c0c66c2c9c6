#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <json.hpp>

#include "cadalign/benchmark.hpp"
#include "cadalign/correspond.hpp"
#include "cadalign/error.hpp"
#include "cadalign/keypoints.hpp"
#include "cadalign/lm.hpp"
#include "cadalign/scene.hpp"
#include "cadalign/voxel_grid.hpp"

namespace cadalign {

using Json = nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "the .vgrid codec assumes a little-endian host");

inline constexpr char kGridMagic[8] = {'C', 'A', 'D', 'V', 'G', 'R', 'I', 'D'};
inline constexpr std::uint32_t kGridVersion = 1;

namespace detail {

template <class T>
void put(std::string& buf, const T& v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <class T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) fail(ErrorKind::Io, "grid file is truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

// float32 nearest to v, nudged toward zero if rounding grew its magnitude so
// range invariants (|sdf| <= truncation, heatmap <= 1) survive the cast.
inline float to_float_inward(double v) {
  float f = static_cast<float>(v);
  if (std::abs(static_cast<double>(f)) > std::abs(v)) f = std::nextafter(f, 0.0f);
  return f;
}

inline std::uint32_t crc32_of(const std::string& buf, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(n)));
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

}  // namespace detail

inline std::string encode_grid(const VoxelGrid& g) {
  require(g.values.size() == g.size(), "grid value count does not match dims");
  std::string buf;
  buf.append(kGridMagic, 8);
  detail::put<std::uint32_t>(buf, kGridVersion);
  detail::put<std::uint32_t>(buf, 0);
  for (int a = 0; a < 3; ++a) detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(g.dims[a]));
  detail::put<double>(buf, g.voxel_size);
  for (int a = 0; a < 3; ++a) detail::put<double>(buf, g.origin[a]);
  detail::put<double>(buf, g.truncation);
  detail::put<std::uint8_t>(buf, static_cast<std::uint8_t>(g.kind));
  for (double v : g.values) detail::put<float>(buf, detail::to_float_inward(v));
  detail::put<std::uint32_t>(buf, detail::crc32_of(buf, buf.size()));
  return buf;
}

inline VoxelGrid decode_grid(const std::string& buf) {
  if (buf.size() < 16 || std::memcmp(buf.data(), kGridMagic, 8) != 0)
    fail(ErrorKind::Io, "not a .vgrid file (bad magic)");
  std::size_t pos = 8;
  const auto version = detail::take<std::uint32_t>(buf, pos);
  if (version != kGridVersion)
    fail(ErrorKind::Io, "unsupported .vgrid version " + std::to_string(version));
  if (buf.size() < 4) fail(ErrorKind::Io, "grid file is truncated");
  std::size_t crc_pos = buf.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + crc_pos, 4);
  if (stored != detail::crc32_of(buf, crc_pos))
    fail(ErrorKind::Io, "grid checksum mismatch (file truncated or corrupted)");

  detail::take<std::uint32_t>(buf, pos);
  VoxelGrid g;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(detail::take<std::uint32_t>(buf, pos));
  g.voxel_size = detail::take<double>(buf, pos);
  for (int a = 0; a < 3; ++a) g.origin[a] = detail::take<double>(buf, pos);
  g.truncation = detail::take<double>(buf, pos);
  const auto kind = detail::take<std::uint8_t>(buf, pos);
  if (kind > 3) fail(ErrorKind::Io, "unknown grid kind " + std::to_string(kind));
  g.kind = static_cast<GridKind>(kind);
  if (g.dims.minCoeff() < 1) fail(ErrorKind::Io, "grid dims must be positive");
  const std::size_t n = g.size();
  if (pos + 4 * n != crc_pos) fail(ErrorKind::Io, "grid payload size does not match dims");
  g.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.values[i] = detail::take<float>(buf, pos);
  return g;
}

inline void save_grid(const fs::path& path, const VoxelGrid& g) {
  detail::write_file(path, encode_grid(g));
}

inline VoxelGrid load_grid(const fs::path& path) { return decode_grid(detail::read_file(path)); }

// ---- JSON helpers ---------------------------------------------------------

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorKind::Validation, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json trs_to_json(const Transform& t) {
  const Trs d = decompose(t);
  return {{"translation", to_json(d.translation)},
          {"rotation", Json::array({d.rotation.w(), d.rotation.x(), d.rotation.y(), d.rotation.z()})},
          {"scale", to_json(d.scale)}};
}

inline Transform trs_from_json(const Json& j) {
  Trs d;
  d.translation = vec3_from_json(j.at("translation"));
  const Json& q = j.at("rotation");
  if (!q.is_array() || q.size() != 4) fail(ErrorKind::Validation, "rotation must be [w,x,y,z]");
  d.rotation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  require(std::abs(d.rotation.norm() - 1.0) < 1e-6, "rotation quaternion is not normalized");
  d.rotation.normalize();
  d.scale = vec3_from_json(j.at("scale"));
  return d.matrix();
}

inline Json sym_to_json(const SymmetryTag& s) {
  return {{"type", to_string(s.type)}, {"axis", to_json(s.axis)}};
}

inline SymmetryTag sym_from_json(const Json& j) {
  SymmetryTag s;
  s.type = symmetry_from_string(j.at("type").get<std::string>());
  if (j.contains("axis")) s.axis = vec3_from_json(j.at("axis"));
  require(s.axis.norm() > 1e-12, "symmetry axis must be non-zero");
  s.axis.normalize();
  return s;
}

inline Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double nullable_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.at(key).get<double>();
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json parse_json_file(const fs::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorKind::Io, "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

// Converts JSON access errors into validation errors naming the file.
template <class F>
auto with_json_errors(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, "invalid content in '" + path.string() + "': " + e.what());
  }
}

// ---- scenes ---------------------------------------------------------------

inline Json scene_to_json(const SceneDescription& d) {
  Json cads = Json::array();
  for (const auto& c : d.cad_models)
    cads.push_back({{"id", c.id},
                    {"generator", to_string(c.generator)},
                    {"category", generator_category(c.generator)},
                    {"seed", c.seed},
                    {"sym", sym_to_json(c.sym)}});
  Json placed = Json::array();
  for (const auto& p : d.placed_models) {
    Json pairs = Json::array();
    for (const auto& kp : p.keypoint_pairs)
      pairs.push_back({{"cad", to_json(kp.cad_point)}, {"scan", to_json(kp.scan_point)}});
    placed.push_back({{"cad_id", p.cad_id},
                      {"category", p.category},
                      {"trs", trs_to_json(p.pose)},
                      {"sym", sym_to_json(p.sym)},
                      {"keypoint_pairs", pairs}});
  }
  return {{"scene_id", d.scene_id}, {"scan", d.scan_path}, {"cad_models", cads},
          {"placed_models", placed}};
}

inline SceneDescription scene_from_json(const Json& j) {
  SceneDescription d;
  d.scene_id = j.at("scene_id").get<std::string>();
  d.scan_path = j.value("scan", std::string());
  for (const auto& c : j.at("cad_models"))
    d.cad_models.push_back({c.at("id").get<std::string>(),
                            generator_from_string(c.at("generator").get<std::string>()),
                            c.at("seed").get<std::uint64_t>(), sym_from_json(c.at("sym"))});
  for (const auto& p : j.at("placed_models")) {
    PlacedModel m;
    m.cad_id = p.at("cad_id").get<std::string>();
    m.category = p.at("category").get<std::string>();
    require(!m.category.empty(), "placed model has an empty category");
    m.pose = trs_from_json(p.at("trs"));
    m.sym = sym_from_json(p.at("sym"));
    for (const auto& kp : p.value("keypoint_pairs", Json::array()))
      m.keypoint_pairs.push_back({vec3_from_json(kp.at("cad")), vec3_from_json(kp.at("scan"))});
    require(m.keypoint_pairs.empty() || m.keypoint_pairs.size() >= 6,
            "placed model '" + m.cad_id + "' needs at least 6 keypoint pairs");
    d.placed_models.push_back(std::move(m));
  }
  return d;
}

inline void save_scene(const fs::path& path, const SceneDescription& d) {
  detail::write_file(path, dump(scene_to_json(d)));
}

inline SceneDescription load_scene(const fs::path& path) {
  const Json j = parse_json_file(path);
  return with_json_errors(path, [&] { return scene_from_json(j); });
}

/// Scan path of a scene, resolved against the scene file's directory.
inline fs::path scene_scan_path(const fs::path& scene_file, const SceneDescription& d) {
  require(!d.scan_path.empty(), "scene has no scan grid reference");
  const fs::path p(d.scan_path);
  return p.is_absolute() ? p : scene_file.parent_path() / p;
}

// ---- alignments -------------------------------------------------------------

struct AlignmentSet {
  std::string scene_id;
  std::vector<AlignedModel> models;
};

inline AlignedModel to_aligned(const AlignmentCandidate& c, const CadSet& cads) {
  auto it = cads.find(c.cad_id);
  if (it == cads.end()) fail(ErrorKind::Validation, "unknown CAD '" + c.cad_id + "'");
  return {c.cad_id, it->second.category, c.pose, c.cost, c.confidence};
}

inline Json alignments_to_json(const AlignmentSet& a) {
  Json models = Json::array();
  for (const auto& m : a.models)
    models.push_back({{"cad_id", m.cad_id},
                      {"category", m.category},
                      {"trs", trs_to_json(m.pose)},
                      {"cost", nullable(m.cost)},
                      {"confidence", nullable(m.confidence)}});
  return {{"scene_id", a.scene_id}, {"aligned_models", models}};
}

inline AlignmentSet alignments_from_json(const Json& j) {
  AlignmentSet a;
  a.scene_id = j.at("scene_id").get<std::string>();
  for (const auto& m : j.at("aligned_models"))
    a.models.push_back({m.at("cad_id").get<std::string>(), m.at("category").get<std::string>(),
                        trs_from_json(m.at("trs")), nullable_from(m, "cost"),
                        nullable_from(m, "confidence")});
  return a;
}

inline void save_alignments(const fs::path& path, const AlignmentSet& a) {
  detail::write_file(path, dump(alignments_to_json(a)));
}

inline AlignmentSet load_alignments(const fs::path& path) {
  const Json j = parse_json_file(path);
  return with_json_errors(path, [&] { return alignments_from_json(j); });
}

// ---- evaluation output ------------------------------------------------------

inline Json eval_to_json(const EvalResult& r) {
  Json per_class = Json::object();
  for (const auto& [cat, s] : r.per_class)
    per_class[cat] = {{"correct", s.correct}, {"total", s.total}, {"accuracy", s.accuracy()}};
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts)
    verdicts.push_back({{"candidate", v.candidate},
                        {"cad_id", v.cad_id},
                        {"category", v.category},
                        {"correct", v.correct},
                        {"gt_index", v.gt_index},
                        {"translation_error", nullable(v.errors.translation)},
                        {"rotation_error", nullable(v.errors.rotation)},
                        {"scale_error", nullable(v.errors.scale)}});
  return {{"accuracy", r.accuracy},   {"class_average", r.class_average},
          {"num_gt", r.num_gt},       {"num_correct", r.num_correct},
          {"empty", r.empty},         {"per_class", per_class},
          {"verdicts", verdicts}};
}

inline const std::vector<std::string>& table_classes() {
  static const std::vector<std::string> k{"bath",    "bookshelf", "cabinet",   "chair", "display",
                                          "sofa",    "table",     "trash bin", "other"};
  return k;
}

/// Per-class accuracy row in the benchmark table layout. Categories outside
/// the named columns are pooled into "other"; absent classes are left blank.
inline std::string eval_to_csv(const EvalResult& r) {
  std::map<std::string, ClassScore> cols;
  for (const auto& [cat, s] : r.per_class) {
    const auto& names = table_classes();
    const bool named = std::find(names.begin(), names.end() - 1, cat) != names.end() - 1;
    ClassScore& dst = cols[named ? cat : "other"];
    dst.correct += s.correct;
    dst.total += s.total;
  }
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  for (const auto& c : table_classes()) out << c << ",";
  out << "class avg.,avg.\n";
  for (const auto& c : table_classes()) {
    auto it = cols.find(c);
    if (it != cols.end() && it->second.total > 0) out << it->second.accuracy();
    out << ",";
  }
  out << r.class_average << "," << r.accuracy << "\n";
  return out.str();
}

inline std::string sweep_to_csv(const std::vector<SweepPoint>& curve, SweepBlock block) {
  std::ostringstream out;
  out << std::setprecision(17) << to_string(block) << "_threshold,accuracy\n";
  for (const auto& p : curve) out << p.threshold << "," << p.accuracy << "\n";
  return out.str();
}

inline std::string trace_to_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(17) << "iteration,level,cost,damping\n";
  for (const auto& r : rows) out << r.iteration << "," << r.level << "," << r.cost << "," << r.damping << "\n";
  return out.str();
}

// ---- keypoints --------------------------------------------------------------

inline Json keypoints_to_json(const std::vector<Keypoint>& kps) {
  Json a = Json::array();
  for (const auto& k : kps) a.push_back({{"position", to_json(k.position)}, {"response", k.response}});
  return a;
}

inline std::vector<Keypoint> keypoints_from_json(const Json& j) {
  std::vector<Keypoint> out;
  for (const auto& k : j) out.push_back({vec3_from_json(k.at("position")), k.at("response").get<double>()});
  return out;
}

// ---- correspondence pairs -----------------------------------------------------

/// Writes pairs as a JSON manifest plus one .vgrid per distinct heatmap
/// (shared heatmaps are stored once) in `dir`.
inline void save_pairs(const fs::path& dir, const std::vector<CorrespondencePair>& pairs) {
  fs::create_directories(dir / "heatmaps");
  std::map<const VoxelGrid*, std::string> files;
  Json arr = Json::array();
  for (const auto& p : pairs) {
    const VoxelGrid* key = p.heatmap.grid.get();
    auto it = files.find(key);
    if (it == files.end()) {
      const std::string name = "heatmaps/" + std::to_string(files.size()) + ".vgrid";
      save_grid(dir / name, *p.heatmap.grid);
      it = files.emplace(key, name).first;
    }
    arr.push_back({{"scan_point", to_json(p.scan_point)},
                   {"cad_id", p.cad_id},
                   {"heatmap", it->second},
                   {"compatibility", p.compatibility},
                   {"scale_pred", to_json(p.scale_pred)}});
  }
  detail::write_file(dir / "pairs.json", dump(Json{{"pairs", arr}}));
}

inline std::vector<CorrespondencePair> load_pairs(const fs::path& dir) {
  const fs::path manifest = dir / "pairs.json";
  const Json j = parse_json_file(manifest);
  std::map<std::string, std::shared_ptr<const VoxelGrid>> cache;
  return with_json_errors(manifest, [&] {
    std::vector<CorrespondencePair> out;
    for (const auto& p : j.at("pairs")) {
      const std::string file = p.at("heatmap").get<std::string>();
      auto it = cache.find(file);
      if (it == cache.end()) {
        VoxelGrid g = load_grid(dir / file);
        require(g.kind == GridKind::Heatmap, "'" + file + "' is not a heatmap grid");
        it = cache.emplace(file, std::make_shared<const VoxelGrid>(std::move(g))).first;
      }
      CorrespondencePair c;
      c.scan_point = vec3_from_json(p.at("scan_point"));
      c.cad_id = p.at("cad_id").get<std::string>();
      c.heatmap = {it->second, c.cad_id};
      c.compatibility = p.at("compatibility").get<double>();
      require(c.compatibility >= 0.0 && c.compatibility <= 1.0, "compatibility outside [0,1]");
      c.scale_pred = vec3_from_json(p.at("scale_pred"));
      out.push_back(std::move(c));
    }
    return out;
  });
}

// ---- training samples ----------------------------------------------------------

/// JSON manifest with labels and grid file names; the grids themselves go
/// next to it as .vgrid files.
inline void save_training_samples(const fs::path& dir, const std::vector<TrainingSample>& samples) {
  fs::create_directories(dir);
  Json arr = Json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::string base = "sample_" + std::to_string(i);
    save_grid(dir / (base + "_scan.vgrid"), s.scan_crop);
    save_grid(dir / (base + "_target.vgrid"), s.target_heatmap);
    arr.push_back({{"index", i},
                   {"polarity", to_string(s.polarity)},
                   {"cad_id", s.cad_id},
                   {"compat_label", s.compat_label},
                   {"scale_label", to_json(s.scale_label)},
                   {"scan_point", to_json(s.scan_point)},
                   {"cad_point", to_json(s.cad_point)},
                   {"scan_crop", base + "_scan.vgrid"},
                   {"target_heatmap", base + "_target.vgrid"}});
  }
  detail::write_file(dir / "samples.json", dump(Json{{"samples", arr}}));
}

}  // namespace cadalign

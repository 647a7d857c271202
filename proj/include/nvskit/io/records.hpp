#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nvskit/dataset.hpp"
#include "nvskit/io/json.hpp"
#include "nvskit/io/png.hpp"
#include "nvskit/metrics.hpp"
#include "nvskit/trainer.hpp"

namespace nvskit::io {

namespace fs = std::filesystem;

// ---- matching pairs (JSONL) ---------------------------------------------

inline void write_pairs(const fs::path& p, const std::vector<MatchPair>& pairs) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  for (const auto& m : pairs)
    out << nlohmann::ordered_json{{"x0", m.x0}, {"y0", m.y0}, {"x1", m.x1}, {"y1", m.y1}}.dump() << '\n';
}

/// Blank lines are skipped; any other malformed line is an error naming it.
inline std::vector<MatchPair> read_pairs(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::vector<MatchPair> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = p.string() + ":" + std::to_string(lineno);
    try {
      const Json j = Json::parse(line);
      out.push_back({get_as<double>(j, "x0", where.c_str()), get_as<double>(j, "y0", where.c_str()),
                     get_as<double>(j, "x1", where.c_str()), get_as<double>(j, "y1", where.c_str())});
    } catch (const Json::parse_error&) {
      throw SchemaError(where + ": not a JSON object");
    }
  }
  return out;
}

// ---- loss log (CSV) -------------------------------------------------------

inline constexpr const char* kLossLogHeader = "step,t_sampled_mean,diffusion_term,mask_term,total";

class LossLog {
 public:
  explicit LossLog(const fs::path& p) : out_(p) {
    if (!out_) throw std::runtime_error("cannot write " + p.string());
    out_ << kLossLogHeader << '\n';
  }

  void append(const StepLog& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.4f,%.9g,%.9g,%.9g\n", s.step, s.t_mean, s.loss.diffusion, s.loss.mask,
                  s.loss.total);
    out_ << buf;
    out_.flush();
  }

 private:
  std::ofstream out_;
};

// ---- rendered views on disk -----------------------------------------------

inline std::string scene_dir_name(int k) {
  char b[32];
  std::snprintf(b, sizeof b, "scene_%05d", k);
  return b;
}
inline std::string view_dir_name(int v) {
  char b[32];
  std::snprintf(b, sizeof b, "view_%02d", v);
  return b;
}

inline Image<std::uint8_t> binary_png(const Mask& m) {
  Image<std::uint8_t> out(m.width, m.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = m.data[i] ? 255 : 0;
  return out;
}

inline Mask mask_from_png(const Image<std::uint8_t>& img) {
  Mask m(img.width, img.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = img.data[i * static_cast<std::size_t>(img.channels)] >= 128;
  return m;
}

inline Image<std::uint8_t> label_png(const LabelMap& ids) {
  Image<std::uint8_t> out(ids.width, ids.height, 1);
  for (std::size_t i = 0; i < ids.data.size(); ++i) {
    if (ids.data[i] < 0 || ids.data[i] > 255) throw std::out_of_range("instance id does not fit 8 bits");
    out.data[i] = static_cast<std::uint8_t>(ids.data[i]);
  }
  return out;
}

inline LabelMap labels_from_png(const Image<std::uint8_t>& img) {
  if (img.channels != 1) throw SchemaError("instance map PNG must be single channel");
  LabelMap m(img.width, img.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = img.data[i];
  return m;
}

inline Image<std::uint16_t> depth_png(const ImageD& normalized) {
  Image<std::uint16_t> out(normalized.width, normalized.height, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<std::uint16_t>(std::lround((std::clamp(normalized.data[i], -1.0, 1.0) + 1.0) * 0.5 * 65535.0));
  return out;
}

inline ImageD depth_from_png(const Image<std::uint16_t>& img) {
  ImageD out(img.width, img.height, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = img.data[i] / 65535.0 * 2.0 - 1.0;
  return out;
}

/// Files: rgb.png, depth.png (16-bit, normalized), depth.json (range sidecar),
/// instance.png (raw ids), amodal_<id>.png, pose.json.
inline void write_view(const fs::path& dir, const RenderedView& v, const CameraPose& cam) {
  fs::create_directories(dir);
  write_png(dir / "rgb.png", v.rgb);
  const auto nd = normalize_depth(v.depth_raw);
  write_png_u16(dir / "depth.png", depth_png(nd.values));
  write_json(dir / "depth.json", {{"schema_version", kSchemaVersion},
                                  {"min_finite", nd.min_finite},
                                  {"max_finite", nd.max_finite},
                                  {"has_background", nd.has_background},
                                  {"degenerate", nd.degenerate}});
  write_png_u8(dir / "instance.png", label_png(v.instance_map));
  for (std::size_t k = 0; k < v.amodal_masks.size(); ++k)
    write_png_u8(dir / ("amodal_" + std::to_string(k + 1) + ".png"), binary_png(v.amodal_masks[k]));
  write_json(dir / "pose.json", pose_to_json(cam));
}

/// Reads a view written by write_view back into training form.
inline ViewRecord read_view(const fs::path& dir, int n_objects) {
  ViewRecord r;
  r.camera = pose_from_json(read_json(dir / "pose.json"));
  r.rgb = read_png_float(dir / "rgb.png");
  if (r.rgb.channels != 3) throw SchemaError((dir / "rgb.png").string() + ": expected RGB");
  r.instance_map = labels_from_png(read_png_u8(dir / "instance.png"));
  const Json dj = read_json(dir / "depth.json");
  check_schema(dj, "depth sidecar");
  const ImageD norm = depth_from_png(read_png_u16(dir / "depth.png"));
  r.depth_raw = get_as<bool>(dj, "degenerate", "depth sidecar")
                    ? ImageD(norm.width, norm.height, 1, kInfDepth)
                    : denormalize_depth(norm, get_as<double>(dj, "min_finite", "depth sidecar"),
                                        get_as<double>(dj, "max_finite", "depth sidecar"),
                                        get_as<bool>(dj, "has_background", "depth sidecar"));
  for (std::size_t i = 0; i < r.depth_raw.data.size(); ++i)
    if (r.instance_map.data[i] == 0) r.depth_raw.data[i] = kInfDepth;
  for (int k = 1; k <= n_objects; ++k)
    r.amodal_masks.push_back(mask_from_png(read_png_u8(dir / ("amodal_" + std::to_string(k) + ".png"))));
  const std::size_t hw = r.rgb.pixel_count();
  if (r.instance_map.pixel_count() != hw || norm.pixel_count() != hw)
    throw SchemaError(dir.string() + ": view buffers differ in size");
  const auto mask = normalize_instance_mask(r.instance_map, n_objects);
  r.rgb_planar.resize(3 * hw);
  r.depth_planar.resize(hw);
  r.mask_planar.resize(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t c = 0; c < 3; ++c) r.rgb_planar[c * hw + i] = 2.0f * r.rgb.data[i * 3 + c] - 1.0f;
    r.depth_planar[i] = static_cast<float>(norm.data[i]);
    r.mask_planar[i] = static_cast<float>(mask.data[i]);
  }
  return r;
}

// ---- dataset manifests ----------------------------------------------------

struct DatasetManifest {
  int scenes = 0;
  int views = 0;
  int resolution = 0;
  std::uint64_t master_seed = 0;
  std::string toolkit_version;
  std::vector<std::string> scene_dirs;
};

inline Json manifest_to_json(const DatasetManifest& m) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "dataset"},
          {"scenes", m.scenes},
          {"views_per_scene", m.views},
          {"resolution", m.resolution},
          {"master_seed", m.master_seed},
          {"toolkit_version", m.toolkit_version},
          {"layout",
           {{"scene_dirs", m.scene_dirs},
            {"scene_file", "scene.json"},
            {"view_dir", "view_XX"},
            {"view_files", {"rgb.png", "depth.png", "depth.json", "instance.png", "amodal_<id>.png", "pose.json"}}}}};
}

/// Parses a manifest and checks that every referenced file exists.
inline DatasetManifest manifest_from_json(const Json& j, const fs::path& root) {
  constexpr const char* where = "dataset manifest";
  check_schema(j, where);
  if (get_as<std::string>(j, "kind", where) != "dataset") throw SchemaError("manifest kind is not 'dataset'");
  DatasetManifest m;
  m.scenes = get_as<int>(j, "scenes", where);
  m.views = get_as<int>(j, "views_per_scene", where);
  m.resolution = get_as<int>(j, "resolution", where);
  m.master_seed = get_as<std::uint64_t>(j, "master_seed", where);
  m.toolkit_version = get_as<std::string>(j, "toolkit_version", where);
  m.scene_dirs = get_as<std::vector<std::string>>(field(j, "layout", where), "scene_dirs", where);
  if (static_cast<int>(m.scene_dirs.size()) != m.scenes) throw SchemaError("manifest scene count mismatch");
  for (const auto& sd : m.scene_dirs) {
    const fs::path sdir = root / sd;
    if (!fs::exists(sdir / "scene.json")) throw SchemaError("missing " + (sdir / "scene.json").string());
    const auto scene = scene_from_json(read_json(sdir / "scene.json"));
    for (int v = 0; v < m.views; ++v) {
      const fs::path vd = sdir / view_dir_name(v);
      std::vector<std::string> files = {"rgb.png", "depth.png", "depth.json", "instance.png", "pose.json"};
      for (int k = 1; k <= scene.size(); ++k) files.push_back("amodal_" + std::to_string(k) + ".png");
      for (const auto& f : files)
        if (!fs::exists(vd / f)) throw SchemaError("missing " + (vd / f).string());
    }
  }
  return m;
}

inline Dataset load_dataset(const fs::path& root, int max_scenes = -1) {
  const auto m = manifest_from_json(read_json(root / "manifest.json"), root);
  Dataset ds;
  ds.width = ds.height = m.resolution;
  const int n = max_scenes < 0 ? m.scenes : std::min(max_scenes, m.scenes);
  for (int k = 0; k < n; ++k) {
    const fs::path sdir = root / m.scene_dirs[static_cast<std::size_t>(k)];
    SceneRecord rec;
    rec.scene = scene_from_json(read_json(sdir / "scene.json"));
    for (int v = 0; v < m.views; ++v) rec.views.push_back(read_view(sdir / view_dir_name(v), rec.scene.size()));
    ds.scenes.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace nvskit::io

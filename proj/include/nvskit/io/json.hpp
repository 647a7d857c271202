#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nvskit/camera.hpp"
#include "nvskit/denoiser.hpp"
#include "nvskit/diffusion.hpp"
#include "nvskit/scene_composer.hpp"
#include "nvskit/timestep_scheduler.hpp"
#include "nvskit/trainer.hpp"

namespace nvskit::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(p.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& p, const Json& j) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

/// Fetches a required key, naming the path in the error.
inline const Json& field(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string(where) + ": missing field '" + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const Json& j, const char* key, const char* where) {
  try {
    return field(j, key, where).get<T>();
  } catch (const Json::type_error& e) {
    throw SchemaError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

inline void check_schema(const Json& j, const char* where) {
  const int v = get_as<int>(j, "schema_version", where);
  if (v != kSchemaVersion)
    throw SchemaError(std::string(where) + ": unsupported schema_version " + std::to_string(v));
}

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec_from(const Json& j, const char* key, const char* where) {
  const auto a = get_as<std::vector<double>>(j, key, where);
  if (a.size() != 3) throw SchemaError(std::string(where) + ": field '" + key + "' needs 3 numbers");
  return {a[0], a[1], a[2]};
}

// ---- scenes -------------------------------------------------------------

inline Json scene_to_json(const SceneComposite& s) {
  Json objs = Json::array();
  for (const auto& o : s.objects) {
    objs.push_back({{"instance_id", o.instance_id},
                    {"template_id", o.template_id},
                    {"category", std::string(category_name(o.category))},
                    {"scale", o.scale},
                    {"yaw", o.yaw},
                    {"translation", vec_json(o.translation)},
                    {"half_extents", vec_json(o.half_extents)},
                    {"color", vec_json(o.color)},
                    {"aabb", {{"min", vec_json(o.aabb.min)}, {"max", vec_json(o.aabb.max)}}}});
  }
  return {{"schema_version", kSchemaVersion},
          {"seed", s.seed},
          {"normalization_factor", s.normalization_factor},
          {"objects", objs}};
}

/// A missing "aabb" is recomputed as the hull of the oriented box.
inline SceneComposite scene_from_json(const Json& j) {
  constexpr const char* where = "scene";
  check_schema(j, where);
  SceneComposite s;
  s.seed = get_as<std::uint64_t>(j, "seed", where);
  s.normalization_factor = get_as<double>(j, "normalization_factor", where);
  for (const auto& jo : field(j, "objects", where)) {
    PlacedObject o;
    o.instance_id = get_as<int>(jo, "instance_id", where);
    o.template_id = get_as<int>(jo, "template_id", where);
    try {
      o.category = parse_category(get_as<std::string>(jo, "category", where));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string(where) + ": " + e.what());
    }
    o.scale = get_as<double>(jo, "scale", where);
    o.yaw = get_as<double>(jo, "yaw", where);
    o.translation = vec_from(jo, "translation", where);
    o.half_extents = vec_from(jo, "half_extents", where);
    o.color = vec_from(jo, "color", where);
    if (jo.contains("aabb")) {
      o.aabb = {vec_from(jo.at("aabb"), "min", where), vec_from(jo.at("aabb"), "max", where)};
      if (!o.aabb.well_formed()) throw SchemaError("scene: malformed aabb");
    } else {
      o.aabb = s.world_box(o).hull();
    }
    s.objects.push_back(o);
  }
  if (s.objects.empty()) throw SchemaError("scene: no objects");
  for (std::size_t i = 0; i < s.objects.size(); ++i)
    if (s.objects[i].instance_id != static_cast<int>(i) + 1)
      throw SchemaError("scene: instance ids must be 1..n in order");
  return s;
}

inline Json catalog_to_json(const std::vector<ObjectTemplate>& cat) {
  Json arr = Json::array();
  for (const auto& t : cat)
    arr.push_back({{"template_id", t.template_id},
                   {"category", std::string(category_name(t.category))},
                   {"half_extents", vec_json(t.half_extents)},
                   {"color", vec_json(t.base_color)}});
  return {{"schema_version", kSchemaVersion}, {"templates", arr}};
}

inline std::vector<ObjectTemplate> catalog_from_json(const Json& j) {
  constexpr const char* where = "catalog";
  check_schema(j, where);
  std::vector<ObjectTemplate> out;
  for (const auto& jt : field(j, "templates", where)) {
    ObjectTemplate t;
    t.template_id = get_as<int>(jt, "template_id", where);
    try {
      t.category = parse_category(get_as<std::string>(jt, "category", where));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string(where) + ": " + e.what());
    }
    t.half_extents = vec_from(jt, "half_extents", where);
    t.base_color = vec_from(jt, "color", where);
    out.push_back(t);
  }
  try {
    validate_catalog(out);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string(where) + ": " + e.what());
  }
  return out;
}

// ---- cameras ------------------------------------------------------------

inline Json pose_to_json(const Mat4& extrinsic, const Intrinsics& intr) {
  return {{"schema_version", kSchemaVersion},
          {"extrinsic", flatten_row_major(extrinsic)},
          {"fov_deg", rad2deg(intr.vertical_fov)},
          {"width", intr.width},
          {"height", intr.height}};
}

inline Json pose_to_json(const CameraPose& c) {
  Json j = pose_to_json(c.extrinsic, c.intrinsic);
  j["eye"] = vec_json(c.eye);
  j["target"] = vec_json(c.target);
  return j;
}

/// Camera pose from its container. eye is recovered from the extrinsic when
/// absent; target defaults to one unit along the view direction.
inline CameraPose pose_from_json(const Json& j) {
  constexpr const char* where = "pose";
  check_schema(j, where);
  const auto flat = get_as<std::vector<double>>(j, "extrinsic", where);
  if (flat.size() != 16) throw SchemaError("pose: extrinsic needs 16 numbers");
  std::array<double, 16> a{};
  std::copy(flat.begin(), flat.end(), a.begin());
  CameraPose c;
  c.extrinsic = unflatten_row_major(a);
  c.intrinsic.vertical_fov = deg2rad(get_as<double>(j, "fov_deg", where));
  c.intrinsic.width = get_as<int>(j, "width", where);
  c.intrinsic.height = get_as<int>(j, "height", where);
  const Mat3 r = c.extrinsic.topLeftCorner<3, 3>();
  const Vec3 t = c.extrinsic.topRightCorner<3, 1>();
  c.eye = j.contains("eye") ? vec_from(j, "eye", where) : Vec3(-r.transpose() * t);
  c.target = j.contains("target") ? vec_from(j, "target", where) : Vec3(c.eye - r.row(2).transpose());
  return c;
}

inline Json relative_pose_to_json(const RelativePose& rp, const Intrinsics& intr) {
  return pose_to_json(rp.matrix(), intr);
}

// ---- diffusion / scheduler / training ----------------------------------

inline Json schedule_to_json(const DiffusionSchedule& s) {
  return {{"schema_version", kSchemaVersion}, {"T", s.T}, {"beta", s.beta}};
}

inline DiffusionSchedule schedule_from_json(const Json& j) {
  check_schema(j, "schedule");
  const int T = get_as<int>(j, "T", "schedule");
  auto beta = get_as<std::vector<double>>(j, "beta", "schedule");
  if (static_cast<int>(beta.size()) != T) throw SchemaError("schedule: beta list length differs from T");
  try {
    return schedule_from_betas(std::move(beta));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("schedule: ") + e.what());
  }
}

inline Json scheduler_to_json(const SchedulerConfig& c) {
  return {{"variant", std::string(variant_name(c.variant))},
          {"mu_global", c.mu_global},
          {"mu_local", c.mu_local},
          {"sigma", c.sigma},
          {"warmup_steps", c.warmup_steps},
          {"decay_end", c.decay_end},
          {"total_steps", c.total_steps},
          {"t_min", c.t_min},
          {"t_max", c.t_max}};
}

inline SchedulerConfig scheduler_from_json(const Json& j) {
  constexpr const char* where = "scheduler";
  SchedulerConfig c;
  try {
    c.variant = parse_variant(get_as<std::string>(j, "variant", where));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string(where) + ": " + e.what());
  }
  c.mu_global = get_as<int>(j, "mu_global", where);
  c.mu_local = get_as<int>(j, "mu_local", where);
  c.sigma = get_as<double>(j, "sigma", where);
  c.warmup_steps = get_as<int>(j, "warmup_steps", where);
  c.decay_end = get_as<int>(j, "decay_end", where);
  c.total_steps = get_as<int>(j, "total_steps", where);
  c.t_min = get_as<int>(j, "t_min", where);
  c.t_max = get_as<int>(j, "t_max", where);
  return c;
}

inline Json sampler_to_json(const SamplerConfig& c) {
  return {{"steps", c.steps}, {"guidance_scale", c.guidance_scale}, {"eta", c.eta}};
}

inline SamplerConfig sampler_from_json(const Json& j) {
  SamplerConfig c;
  c.steps = get_as<int>(j, "steps", "sampler");
  c.guidance_scale = get_as<double>(j, "guidance_scale", "sampler");
  c.eta = get_as<double>(j, "eta", "sampler");
  return c;
}

inline Json arch_to_json(const ArchConfig& a) {
  return {{"height", a.height},         {"width", a.width},
          {"base_width", a.base_width}, {"time_dim", a.time_dim},
          {"embed_dim", a.embed_dim},   {"depth_input", a.depth_input},
          {"mask_input", a.mask_input}};
}

inline ArchConfig arch_from_json(const Json& j) {
  constexpr const char* where = "arch";
  ArchConfig a;
  a.height = get_as<int>(j, "height", where);
  a.width = get_as<int>(j, "width", where);
  a.base_width = get_as<int>(j, "base_width", where);
  a.time_dim = get_as<int>(j, "time_dim", where);
  a.embed_dim = get_as<int>(j, "embed_dim", where);
  a.depth_input = get_as<bool>(j, "depth_input", where);
  a.mask_input = get_as<bool>(j, "mask_input", where);
  return a;
}

inline Json train_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},       {"learning_rate", c.learning_rate},
          {"total_steps", c.total_steps},     {"gamma", c.gamma},
          {"cond_dropout_p", c.cond_dropout_p}, {"seed", c.seed},
          {"scheduler", scheduler_to_json(c.scheduler)}};
}

inline TrainConfig train_from_json(const Json& j) {
  constexpr const char* where = "train";
  TrainConfig c;
  c.batch_size = get_as<int>(j, "batch_size", where);
  c.learning_rate = get_as<double>(j, "learning_rate", where);
  c.total_steps = get_as<int>(j, "total_steps", where);
  c.gamma = get_as<double>(j, "gamma", where);
  c.cond_dropout_p = get_as<double>(j, "cond_dropout_p", where);
  c.seed = get_as<std::uint64_t>(j, "seed", where);
  c.scheduler = scheduler_from_json(field(j, "scheduler", where));
  return c;
}

}  // namespace nvskit::io

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nvskit/geometry.hpp"
#include "nvskit/rng.hpp"

namespace nvskit {

enum class Category { bed, bookshelf, cabinet, chair, nightstand, sofa, table };

inline constexpr std::array<Category, 7> kAllCategories = {
    Category::bed,   Category::bookshelf, Category::cabinet, Category::chair,
    Category::nightstand, Category::sofa, Category::table};

inline constexpr std::string_view category_name(Category c) {
  constexpr std::array<std::string_view, 7> names = {
      "bed", "bookshelf", "cabinet", "chair", "nightstand", "sofa", "table"};
  return names[static_cast<std::size_t>(c)];
}

inline Category parse_category(std::string_view s) {
  for (auto c : kAllCategories)
    if (category_name(c) == s) return c;
  throw std::invalid_argument("unknown furniture category: " + std::string(s));
}

struct ObjectTemplate {
  Category category = Category::table;
  Vec3 half_extents = Vec3::Constant(0.5);
  Vec3 base_color = Vec3::Constant(0.5);
  int template_id = 0;
};

/// Throws if any template has a non-positive extent, an out-of-range color or
/// a duplicated id.
inline void validate_catalog(const std::vector<ObjectTemplate>& catalog) {
  if (catalog.empty()) throw std::invalid_argument("catalog is empty");
  std::vector<int> ids;
  for (const auto& t : catalog) {
    if (!(t.half_extents.array() > 0.0).all() || !t.half_extents.allFinite())
      throw std::invalid_argument("template " + std::to_string(t.template_id) +
                                  ": half_extents must be strictly positive");
    if ((t.base_color.array() < 0.0).any() || (t.base_color.array() > 1.0).any())
      throw std::invalid_argument("template " + std::to_string(t.template_id) +
                                  ": base_color must lie in [0,1]");
    ids.push_back(t.template_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw std::invalid_argument("catalog has duplicate template_id");
}

/// Three size/color variants per category. Dimensions are rough real-world
/// furniture sizes in meters; colors stay dark enough to read as foreground
/// against a white background.
inline std::vector<ObjectTemplate> default_catalog() {
  struct Proto {
    Category cat;
    Vec3 half;
    Vec3 color;
  };
  const std::array<Proto, 7> protos = {{
      {Category::bed, {1.00, 0.25, 0.80}, {0.70, 0.20, 0.20}},
      {Category::bookshelf, {0.45, 0.90, 0.18}, {0.45, 0.30, 0.15}},
      {Category::cabinet, {0.50, 0.45, 0.25}, {0.25, 0.35, 0.65}},
      {Category::chair, {0.25, 0.45, 0.25}, {0.20, 0.55, 0.25}},
      {Category::nightstand, {0.25, 0.28, 0.22}, {0.60, 0.45, 0.10}},
      {Category::sofa, {0.90, 0.40, 0.45}, {0.50, 0.20, 0.55}},
      {Category::table, {0.70, 0.38, 0.45}, {0.15, 0.45, 0.50}},
  }};
  const std::array<double, 3> size_var = {1.0, 0.85, 1.15};
  const std::array<double, 3> tint = {1.0, 0.75, 1.2};
  std::vector<ObjectTemplate> out;
  int id = 0;
  for (const auto& p : protos) {
    for (std::size_t v = 0; v < 3; ++v) {
      ObjectTemplate t;
      t.category = p.cat;
      t.half_extents = p.half * size_var[v];
      t.base_color = (p.color * tint[v]).cwiseMin(0.85);
      t.template_id = id++;
      out.push_back(t);
    }
  }
  return out;
}

struct PlacedObject {
  int instance_id = 1;
  int template_id = 0;
  Category category = Category::table;
  double scale = 1.0;  ///< random size jitter in [0.95, 1.05]
  double yaw = 0.0;
  Vec3 translation = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();  ///< template half extents (unscaled)
  Vec3 color = Vec3::Constant(0.5);
  Aabb aabb;

  friend bool operator==(const PlacedObject&, const PlacedObject&) = default;
};

/// Objects are stored in normalized world units: the union box is centered at
/// the origin and its longest side has length 1. An object's world geometry is
/// the template box scaled by `scale * normalization_factor`, rotated by yaw
/// about +y and moved to `translation`.
struct SceneComposite {
  std::vector<PlacedObject> objects;
  std::uint64_t seed = 0;
  double normalization_factor = 1.0;

  OrientedBox world_box(const PlacedObject& o) const {
    return {o.translation, yaw_rotation(o.yaw), o.half_extents * (o.scale * normalization_factor)};
  }

  Aabb bounds() const {
    Aabb b = objects.front().aabb;
    for (const auto& o : objects) b.expand(o.aabb);
    return b;
  }

  int size() const noexcept { return static_cast<int>(objects.size()); }

  friend bool operator==(const SceneComposite&, const SceneComposite&) = default;
};

struct ComposeOptions {
  /// Relative weights per category, indexed like kAllCategories.
  std::array<double, 7> category_weights = {1, 1, 1, 1, 1, 1, 1};
  std::optional<int> forced_count;
  int min_count = 3;
  int max_count = 6;
  double push_step = 0.01;
  int max_push_steps = 10000;
};

class PlacementError : public std::runtime_error {
 public:
  explicit PlacementError(int index)
      : std::runtime_error("could not place object " + std::to_string(index) +
                           " without collision within the push budget"),
        object_index(index) {}
  int object_index;
};

/// Unit vector in the ground plane for a given heading angle.
inline Vec3 placement_direction_from_angle(double angle) {
  return {std::cos(angle), 0.0, std::sin(angle)};
}

inline Vec3 sample_placement_direction(Rng& rng) {
  return placement_direction_from_angle(rng.uniform(0.0, 2.0 * std::numbers::pi));
}

namespace detail {

inline Category sample_category(Rng& rng, const std::vector<ObjectTemplate>& catalog,
                                const std::array<double, 7>& weights) {
  std::array<double, 7> w{};
  double total = 0.0;
  for (std::size_t k = 0; k < 7; ++k) {
    const bool present = std::any_of(catalog.begin(), catalog.end(), [&](const auto& t) {
      return t.category == kAllCategories[k];
    });
    w[k] = present ? std::max(weights[k], 0.0) : 0.0;
    total += w[k];
  }
  if (total <= 0.0) throw std::invalid_argument("category weights select no catalog entry");
  double u = rng.uniform(0.0, total);
  for (std::size_t k = 0; k < 7; ++k) {
    if (u < w[k]) return kAllCategories[k];
    u -= w[k];
  }
  for (std::size_t k = 7; k-- > 0;)
    if (w[k] > 0.0) return kAllCategories[k];
  return kAllCategories[0];
}

}  // namespace detail

/// Builds a collision-free composite. Each new object starts at the origin and
/// is pushed in fixed increments along a random ground-plane direction until
/// its box clears every previously placed box.
inline SceneComposite compose_scene(const std::vector<ObjectTemplate>& catalog, std::uint64_t seed,
                                    const ComposeOptions& opts = {}) {
  validate_catalog(catalog);
  Rng rng(seed);
  const int count = opts.forced_count
                        ? *opts.forced_count
                        : static_cast<int>(rng.uniform_int(opts.min_count, opts.max_count));
  if (count < 1) throw std::invalid_argument("object count must be positive");

  SceneComposite scene;
  scene.seed = seed;
  for (int k = 0; k < count; ++k) {
    const Category cat = detail::sample_category(rng, catalog, opts.category_weights);
    std::vector<const ObjectTemplate*> pool;
    for (const auto& t : catalog)
      if (t.category == cat) pool.push_back(&t);
    const ObjectTemplate& tpl =
        *pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];

    PlacedObject obj;
    obj.instance_id = k + 1;
    obj.template_id = tpl.template_id;
    obj.category = tpl.category;
    obj.half_extents = tpl.half_extents;
    obj.color = tpl.base_color;
    obj.scale = rng.uniform(0.95, 1.05);
    obj.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);

    const OrientedBox local{Vec3::Zero(), yaw_rotation(obj.yaw), tpl.half_extents * obj.scale};
    const Aabb base = local.hull();

    auto collides = [&](const Aabb& box) {
      return std::any_of(scene.objects.begin(), scene.objects.end(),
                         [&](const PlacedObject& p) { return aabb_intersects(box, p.aabb); });
    };

    Vec3 pos = Vec3::Zero();
    if (k > 0) {
      const Vec3 dir = sample_placement_direction(rng);
      int steps = 0;
      while (collides(base.translated(pos))) {
        if (++steps > opts.max_push_steps) throw PlacementError(k);
        pos = dir * (opts.push_step * steps);
      }
    }
    obj.translation = pos;
    obj.aabb = base.translated(pos);
    scene.objects.push_back(obj);
  }

  const Aabb u = scene.bounds();
  const double longest = u.extent().maxCoeff();
  const Vec3 c = u.center();
  scene.normalization_factor = 1.0 / longest;
  for (auto& o : scene.objects) {
    o.translation = (o.translation - c) * scene.normalization_factor;
    // Affine map with a positive factor keeps strict separations strict.
    o.aabb = {(o.aabb.min - c) * scene.normalization_factor,
              (o.aabb.max - c) * scene.normalization_factor};
  }
  return scene;
}

}  // namespace nvskit

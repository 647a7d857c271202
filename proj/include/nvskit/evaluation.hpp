#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nvskit/dataset.hpp"
#include "nvskit/io/json.hpp"
#include "nvskit/io/png.hpp"
#include "nvskit/io/records.hpp"
#include "nvskit/metrics.hpp"

namespace nvskit {

namespace fs = std::filesystem;

/// gt_dir/<name>/ holds target.png, fg.png, target_instance.png,
/// input_instance.png, input_amodal_<id>.png and meta.json.
inline void write_gt_entry(const fs::path& dir, const ViewRecord& input, const ViewRecord& target, int n_objects) {
  fs::create_directories(dir);
  io::write_png(dir / "target.png", target.rgb);
  Mask fg(target.instance_map.width, target.instance_map.height, 1);
  for (std::size_t i = 0; i < fg.data.size(); ++i) fg.data[i] = target.instance_map.data[i] != 0;
  io::write_png_u8(dir / "fg.png", io::binary_png(fg));
  io::write_png_u8(dir / "target_instance.png", io::label_png(target.instance_map));
  io::write_png_u8(dir / "input_instance.png", io::label_png(input.instance_map));
  for (int k = 1; k <= n_objects; ++k)
    io::write_png_u8(dir / ("input_amodal_" + std::to_string(k) + ".png"),
                     io::binary_png(input.amodal_masks[static_cast<std::size_t>(k - 1)]));
  io::write_json(dir / "meta.json", {{"schema_version", io::kSchemaVersion}, {"n_objects", n_objects}});
}

struct ImageEval {
  std::string name;
  std::optional<std::string> error;
  double psnr = 0.0;
  double ssim = 0.0;
  double iou = 0.0;
  std::optional<double> hit_rate;
  std::optional<double> dist;
  std::size_t gt_pairs = 0;
  std::size_t pred_pairs = 0;
  std::vector<std::string> notes;
};

struct RegionScore {
  std::string image;
  int instance_id = 0;
  OcclusionClass cls = OcclusionClass::Visible;
  RegionMetrics metrics;
};

struct EvalReport {
  std::vector<ImageEval> images;
  std::vector<RegionScore> regions;
};

namespace detail {

inline io::Json number_or_null(double v) { return std::isfinite(v) ? io::Json(v) : io::Json(nullptr); }

inline ImageEval evaluate_one(const std::string& name, const fs::path& pred_png, const fs::path& gt,
                              const fs::path& pairs_dir, double threshold, std::vector<RegionScore>& regions) {
  ImageEval e;
  e.name = name;
  try {
    if (!fs::exists(pred_png)) throw std::runtime_error("missing prediction " + pred_png.string());
    const ImageF pred = io::read_png_float(pred_png);
    const ImageF target = io::read_png_float(gt / "target.png");
    if (!pred.same_shape(target)) throw std::runtime_error("prediction shape differs from gt");
    const Mask fg = io::mask_from_png(io::read_png_u8(gt / "fg.png"));
    e.psnr = psnr(pred, target);
    e.ssim = ssim(pred, target);
    e.iou = foreground_iou(pred, fg);

    const fs::path gp = pairs_dir / (name + ".gt.jsonl"), pp = pairs_dir / (name + ".pred.jsonl");
    if (fs::exists(gp) && fs::exists(pp)) {
      const auto g = io::read_pairs(gp), p = io::read_pairs(pp);
      e.gt_pairs = g.size();
      e.pred_pairs = p.size();
      if (g.empty()) {
        e.notes.push_back("undefined hit rate: no gt pairs");
      } else {
        e.hit_rate = hit_rate(g, p, threshold);
        try {
          e.dist = nearest_match_distance(g, p, threshold);
        } catch (const NoMatchesError&) {
          e.notes.push_back("no matches within threshold");
        }
      }
    } else {
      e.notes.push_back("missing pair files");
    }

    const int n = io::get_as<int>(io::read_json(gt / "meta.json"), "n_objects", "gt meta");
    const LabelMap in_ids = io::labels_from_png(io::read_png_u8(gt / "input_instance.png"));
    const LabelMap tgt_ids = io::labels_from_png(io::read_png_u8(gt / "target_instance.png"));
    for (int k = 1; k <= n; ++k) {
      const Mask amodal = io::mask_from_png(io::read_png_u8(gt / ("input_amodal_" + std::to_string(k) + ".png")));
      Mask visible(in_ids.width, in_ids.height, 1), region(tgt_ids.width, tgt_ids.height, 1);
      std::size_t na = 0, nr = 0;
      for (std::size_t i = 0; i < visible.data.size(); ++i) {
        visible.data[i] = in_ids.data[i] == k;
        na += amodal.data[i];
      }
      for (std::size_t i = 0; i < region.data.size(); ++i) nr += region.data[i] = tgt_ids.data[i] == k;
      if (na == 0 || nr == 0) continue;  // not in the input frame, or not visible in the target
      regions.push_back({name, k, occlusion_class(visible, amodal), region_metrics(pred, target, region)});
    }
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  return e;
}

}  // namespace detail

/// Scores every gt entry that has a prediction. Missing or unreadable
/// predictions become per-image errors; they are excluded from aggregates.
inline EvalReport evaluate_run(const fs::path& pred_dir, const fs::path& gt_dir, const fs::path& pairs_dir,
                               double match_threshold = kMatchThreshold) {
  if (!fs::is_directory(gt_dir)) throw std::runtime_error("gt directory not found: " + gt_dir.string());
  if (!fs::is_directory(pred_dir)) throw std::runtime_error("prediction directory not found: " + pred_dir.string());
  std::vector<std::string> names;
  for (const auto& d : fs::directory_iterator(gt_dir))
    if (d.is_directory()) names.push_back(d.path().filename().string());
  std::sort(names.begin(), names.end());
  std::size_t present = 0;
  for (const auto& n : names) present += fs::exists(pred_dir / (n + ".png"));
  if (present == 0) throw std::runtime_error("no prediction matches any gt entry");
  EvalReport r;
  for (const auto& n : names)
    r.images.push_back(detail::evaluate_one(n, pred_dir / (n + ".png"), gt_dir / n, pairs_dir, match_threshold, r.regions));
  return r;
}

/// Mean of finite values plus how many were +inf, for PSNR-like columns.
struct PsnrMean {
  double mean = 0.0;
  std::size_t finite = 0;
  std::size_t infinite = 0;
};

inline PsnrMean psnr_mean(const std::vector<double>& v) {
  PsnrMean m;
  for (double x : v) {
    if (std::isfinite(x)) {
      m.mean += x;
      ++m.finite;
    } else {
      ++m.infinite;
    }
  }
  if (m.finite) m.mean /= static_cast<double>(m.finite);
  return m;
}

inline io::Json psnr_json(const PsnrMean& m) {
  // All-infinite means every entry was exact: reported as null plus the flag.
  return {{"psnr", m.finite ? io::Json(m.mean) : io::Json(nullptr)},
          {"psnr_infinite", m.finite == 0 && m.infinite > 0},
          {"psnr_infinite_count", m.infinite}};
}

inline io::Json report_to_json(const EvalReport& r) {
  using io::Json;
  Json per = Json::array();
  std::vector<double> ps, ss, is, hs, ds;
  std::size_t errors = 0;
  for (const auto& e : r.images) {
    Json j = {{"name", e.name}};
    if (e.error) {
      ++errors;
      j["status"] = "error";
      j["error"] = *e.error;
      per.push_back(j);
      continue;
    }
    j["status"] = "ok";
    j["psnr"] = detail::number_or_null(e.psnr);
    j["psnr_infinite"] = std::isinf(e.psnr);
    j["ssim"] = e.ssim;
    j["iou"] = e.iou;
    j["hit_rate"] = e.hit_rate ? Json(*e.hit_rate) : Json(nullptr);
    j["dist"] = e.dist ? Json(*e.dist) : Json(nullptr);
    j["gt_pairs"] = e.gt_pairs;
    j["pred_pairs"] = e.pred_pairs;
    j["notes"] = e.notes;
    per.push_back(j);
    ps.push_back(e.psnr);
    ss.push_back(e.ssim);
    is.push_back(e.iou);
    if (e.hit_rate) hs.push_back(*e.hit_rate);
    if (e.dist) ds.push_back(*e.dist);
  }
  const auto mean = [](const std::vector<double>& v) -> Json {
    if (v.empty()) return nullptr;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  Json agg = psnr_json(psnr_mean(ps));
  agg["count"] = ps.size();
  agg["error_count"] = errors;
  agg["ssim"] = mean(ss);
  agg["iou"] = mean(is);
  agg["hit_rate"] = mean(hs);
  agg["hit_rate_count"] = hs.size();
  agg["dist"] = mean(ds);
  agg["dist_count"] = ds.size();

  Json occ = Json::object();
  for (auto cls : {OcclusionClass::Visible, OcclusionClass::Occluded, OcclusionClass::HeavilyOccluded}) {
    std::vector<double> rp, rs;
    for (const auto& g : r.regions)
      if (g.cls == cls) {
        rp.push_back(g.metrics.psnr);
        rs.push_back(g.metrics.ssim);
      }
    Json c = psnr_json(psnr_mean(rp));
    c["count"] = rp.size();
    c["ssim"] = mean(rs);
    occ[occlusion_name(cls)] = c;
  }
  return {{"schema_version", io::kSchemaVersion},
          {"kind", "eval_report"},
          {"metrics", {"psnr", "ssim", "iou", "hit_rate", "dist"}},
          {"omitted_metrics", {"lpips"}},
          {"per_image", per},
          {"aggregate", agg},
          {"occlusion", occ}};
}

}  // namespace nvskit

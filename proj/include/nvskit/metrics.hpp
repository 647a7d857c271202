#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "nvskit/image.hpp"

namespace nvskit {

/// One correspondence: (x0, y0) in the input view, (x1, y1) in the output view.
struct MatchPair {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) for images in [0,1]; +inf when the inputs are identical.
inline double psnr(const ImageF& a, const ImageF& b) {
  require_same_shape(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    se += d * d;
  }
  if (se == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(static_cast<double>(a.data.size()) / se);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// 'valid' separable filtering of a single-channel plane.
inline std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                        const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y * w + x + i)];
      tmp[static_cast<std::size_t>(y * ow + x)] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>((y + i) * ow + x)];
      out[static_cast<std::size_t>(y * ow + x)] = s;
    }
  return out;
}

}  // namespace detail

/// Mean local SSIM with a Gaussian window over valid positions, averaged over
/// channels.
inline double ssim(const ImageF& a, const ImageF& b, const SsimParams& p = {}) {
  require_same_shape(a, b, "ssim");
  if (a.width < p.window || a.height < p.window)
    throw std::invalid_argument("ssim: image sides must be at least the window size");
  const auto k = detail::gaussian_kernel(p.window, p.sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixel_count();
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double va = a.data[i * static_cast<std::size_t>(a.channels) + static_cast<std::size_t>(c)];
      const double vb = b.data[i * static_cast<std::size_t>(b.channels) + static_cast<std::size_t>(c)];
      pa[i] = va;
      pb[i] = vb;
      paa[i] = va * va;
      pbb[i] = vb * vb;
      pab[i] = va * vb;
    }
    const auto ma = detail::filter_valid(pa, w, h, k);
    const auto mb = detail::filter_valid(pb, w, h, k);
    const auto maa = detail::filter_valid(paa, w, h, k);
    const auto mbb = detail::filter_valid(pbb, w, h, k);
    const auto mab = detail::filter_valid(pab, w, h, k);
    double acc = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double va = maa[i] - ma[i] * ma[i];
      const double vb = mbb[i] - mb[i] * mb[i];
      const double cov = mab[i] - ma[i] * mb[i];
      acc += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) /
             ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    total += acc / static_cast<double>(ma.size());
  }
  return total / a.channels;
}

/// Quantizes [0,1] floats to 8 bits.
inline Image<std::uint8_t> quantize(const ImageF& img) {
  Image<std::uint8_t> out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  return out;
}

inline constexpr double kForegroundThreshold = 250.0;

/// Pixels darker than the threshold on the 0-255 luminance scale.
inline Mask foreground_mask(const Image<std::uint8_t>& rgb, double threshold = kForegroundThreshold) {
  if (rgb.channels != 3) throw std::invalid_argument("foreground_mask: expected an RGB image");
  Mask m(rgb.width, rgb.height, 1, 0);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) {
      const double lum = 0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) + 0.114 * rgb.at(x, y, 2);
      m.at(x, y) = lum < threshold ? 1 : 0;
    }
  return m;
}

/// IoU of two binary masks; two empty masks have IoU 1.
inline double mask_iou(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "mask_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0, pb = b.data[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double foreground_iou(const Image<std::uint8_t>& pred_rgb, const Mask& gt_fg) {
  return mask_iou(foreground_mask(pred_rgb), gt_fg);
}
inline double foreground_iou(const ImageF& pred_rgb, const Mask& gt_fg) {
  return foreground_iou(quantize(pred_rgb), gt_fg);
}

inline constexpr double kMatchThreshold = 20.0;

namespace detail {

inline double input_dist(const MatchPair& a, const MatchPair& b) { return std::hypot(a.x0 - b.x0, a.y0 - b.y0); }
inline double output_dist(const MatchPair& a, const MatchPair& b) { return std::hypot(a.x1 - b.x1, a.y1 - b.y1); }

// Index of the pool entry nearest in the input view; lowest index wins ties.
inline std::size_t nearest_in_input(const MatchPair& gt, const std::vector<MatchPair>& pool) {
  std::size_t best = 0;
  double best_d = input_dist(gt, pool[0]);
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const double d = input_dist(gt, pool[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Greedy hit counting: gt pairs in order, each claims its nearest remaining
/// prediction (by input-view distance) when both endpoints are within the
/// threshold. A claimed prediction leaves the pool.
inline double hit_rate(std::span<const MatchPair> gt_pairs, std::span<const MatchPair> pred_pairs,
                       double threshold = kMatchThreshold) {
  if (gt_pairs.empty()) throw std::invalid_argument("undefined hit rate: no ground-truth pairs");
  std::vector<MatchPair> pool(pred_pairs.begin(), pred_pairs.end());
  std::size_t hits = 0;
  for (const auto& gt : gt_pairs) {
    if (pool.empty()) break;
    const std::size_t i = detail::nearest_in_input(gt, pool);
    if (detail::input_dist(gt, pool[i]) < threshold && detail::output_dist(gt, pool[i]) < threshold) {
      ++hits;
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  return static_cast<double>(hits) / static_cast<double>(gt_pairs.size());
}

class NoMatchesError : public std::runtime_error {
 public:
  NoMatchesError() : std::runtime_error("no matches within threshold") {}
};

/// Mean output-view distance over gt pairs whose nearest remaining prediction
/// lies within the threshold in the input view.
inline double nearest_match_distance(std::span<const MatchPair> gt_pairs, std::span<const MatchPair> pred_pairs,
                                     double threshold = kMatchThreshold) {
  if (gt_pairs.empty()) throw std::invalid_argument("undefined matching distance: no ground-truth pairs");
  std::vector<MatchPair> pool(pred_pairs.begin(), pred_pairs.end());
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& gt : gt_pairs) {
    if (pool.empty()) break;
    const std::size_t i = detail::nearest_in_input(gt, pool);
    if (detail::input_dist(gt, pool[i]) < threshold) {
      sum += detail::output_dist(gt, pool[i]);
      ++count;
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  if (count == 0) throw NoMatchesError();
  return sum / static_cast<double>(count);
}

enum class OcclusionClass { Visible, Occluded, HeavilyOccluded };

inline constexpr const char* occlusion_name(OcclusionClass c) {
  switch (c) {
    case OcclusionClass::Visible: return "visible";
    case OcclusionClass::Occluded: return "occluded";
    case OcclusionClass::HeavilyOccluded: return "heavily_occluded";
  }
  return "?";
}

inline constexpr double kOcclusionRatio = 0.7;

inline OcclusionClass occlusion_class(const Mask& visible, const Mask& amodal) {
  require_same_shape(visible, amodal, "occlusion_class");
  std::size_t nv = 0, na = 0;
  for (std::size_t i = 0; i < visible.data.size(); ++i) {
    const bool v = visible.data[i] != 0, a = amodal.data[i] != 0;
    if (v && !a) throw std::invalid_argument("occlusion_class: visible mask is not contained in the amodal mask");
    nv += v ? 1 : 0;
    na += a ? 1 : 0;
  }
  if (na == 0) throw std::invalid_argument("occlusion_class: empty amodal mask");
  if (nv == na) return OcclusionClass::Visible;
  const double r = static_cast<double>(nv) / static_cast<double>(na);
  return r > kOcclusionRatio ? OcclusionClass::Occluded : OcclusionClass::HeavilyOccluded;
}

struct RegionMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
};

/// PSNR over region pixels only. SSIM over the region's bounding box (grown
/// to at least one SSIM window), with out-of-region pixels taken from gt in
/// both images.
inline RegionMetrics region_metrics(const ImageF& pred, const ImageF& gt, const Mask& region,
                                    const SsimParams& p = {}) {
  require_same_shape(pred, gt, "region_metrics");
  if (region.width != gt.width || region.height != gt.height)
    throw std::invalid_argument("region_metrics: region mask shape mismatch");
  int x0 = gt.width, y0 = gt.height, x1 = -1, y1 = -1;
  double se = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) {
      if (!region.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
      for (int c = 0; c < gt.channels; ++c) {
        const double d = static_cast<double>(pred.at(x, y, c)) - gt.at(x, y, c);
        se += d * d;
        ++n;
      }
    }
  if (n == 0) throw std::invalid_argument("region_metrics: empty region");

  RegionMetrics out;
  out.psnr = se == 0.0 ? kPsnrInfinite : 10.0 * std::log10(static_cast<double>(n) / se);

  const auto grow = [&](int& lo, int& hi, int limit) {
    while (hi - lo + 1 < p.window) {
      if (lo > 0) --lo;
      if (hi - lo + 1 < p.window && hi < limit - 1) ++hi;
      if (lo == 0 && hi == limit - 1) break;
    }
  };
  grow(x0, x1, gt.width);
  grow(y0, y1, gt.height);
  const int cw = x1 - x0 + 1, ch = y1 - y0 + 1;
  ImageF cp(cw, ch, gt.channels), cg(cw, ch, gt.channels);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x)
      for (int c = 0; c < gt.channels; ++c) {
        const float g = gt.at(x0 + x, y0 + y, c);
        cg.at(x, y, c) = g;
        cp.at(x, y, c) = region.at(x0 + x, y0 + y) ? pred.at(x0 + x, y0 + y, c) : g;
      }
  out.ssim = ssim(cp, cg, p);
  return out;
}

}  // namespace nvskit

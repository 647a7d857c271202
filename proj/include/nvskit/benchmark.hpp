#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvskit/dataset.hpp"
#include "nvskit/metrics.hpp"
#include "nvskit/trainer.hpp"

namespace nvskit {

/// Held-out (input view, target view) pairs used to score a trained model.
struct EvalPair {
  std::size_t scene = 0;
  int input_view = 0;
  int target_view = 1;
};

inline std::vector<EvalPair> default_eval_pairs(const Dataset& ds, int pairs_per_scene = 1) {
  std::vector<EvalPair> out;
  for (std::size_t k = 0; k < ds.scenes.size(); ++k)
    for (int p = 0; p < pairs_per_scene; ++p) {
      const int nv = static_cast<int>(ds.scenes[k].views.size());
      out.push_back({k, (2 * p) % nv, (2 * p + 1) % nv});
    }
  return out;
}

struct PairScore {
  double psnr = 0.0;
  double ssim = 0.0;
  double iou = 0.0;
};

struct ModelScore {
  std::vector<PairScore> pairs;
  double mean_psnr = 0.0;  ///< over finite entries
  double mean_ssim = 0.0;
  double mean_iou = 0.0;
};

inline Mask foreground_of(const LabelMap& instance_map) {
  Mask m(instance_map.width, instance_map.height, 1, 0);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = instance_map.data[i] > 0 ? 1 : 0;
  return m;
}

/// Generates every pair's target view (batched) and scores it against the
/// rendered ground truth.
inline ModelScore score_model(Denoiser<float>& net, const Dataset& test, const std::vector<EvalPair>& pairs,
                              const SamplerConfig& sampler, std::uint64_t seed, int chunk = 16) {
  ModelScore score;
  const auto sched = make_schedule();
  for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(chunk));
    std::vector<ConditioningBundle<float>> cond;
    for (std::size_t i = start; i < end; ++i)
      cond.push_back(make_example(test.scenes[pairs[i].scene], pairs[i].input_view, pairs[i].target_view).cond);
    const auto gen = generate(net, cond, sampler, sched, derive_seed(seed, start));
    for (std::size_t i = start; i < end; ++i) {
      const auto& gt = test.scenes[pairs[i].scene].views[static_cast<std::size_t>(pairs[i].target_view)];
      const ImageF pred = tensor_to_image(gen.image, static_cast<int>(i - start));
      score.pairs.push_back({psnr(pred, gt.rgb), ssim(pred, gt.rgb), foreground_iou(pred, foreground_of(gt.instance_map))});
    }
  }
  std::size_t finite = 0;
  for (const auto& p : score.pairs) {
    if (std::isfinite(p.psnr)) {
      score.mean_psnr += p.psnr;
      ++finite;
    }
    score.mean_ssim += p.ssim;
    score.mean_iou += p.iou;
  }
  const auto n = static_cast<double>(score.pairs.size());
  score.mean_psnr = finite ? score.mean_psnr / static_cast<double>(finite) : kPsnrInfinite;
  score.mean_ssim /= n;
  score.mean_iou /= n;
  return score;
}

}  // namespace nvskit

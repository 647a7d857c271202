#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvskit/camera.hpp"
#include "nvskit/image.hpp"
#include "nvskit/nn/layers.hpp"
#include "nvskit/nn/params.hpp"
#include "nvskit/nn/tensor.hpp"
#include "nvskit/rng.hpp"

namespace nvskit {

/// Encoder-decoder with skip connections over three resolutions.
struct ArchConfig {
  int height = 32;
  int width = 32;
  int base_width = 32;
  int time_dim = 64;   ///< sinusoidal embedding size
  int embed_dim = 64;  ///< hidden size of the time / pose MLPs
  bool depth_input = true;  ///< false zeroes the depth channel (ablation)
  bool mask_input = true;   ///< false zeroes the instance-mask channel (ablation)

  static constexpr int kInputChannels = 8;  // x_t(3) | rgb(3) | depth(1) | mask(1)
  static constexpr int kPoseDim = 16;

  void validate() const {
    if (height % 4 != 0 || width % 4 != 0) throw std::invalid_argument("arch: image sides must be multiples of 4");
    if (base_width < 1 || time_dim < 2 || time_dim % 2 != 0 || embed_dim < 1)
      throw std::invalid_argument("arch: invalid widths");
  }
};

/// Input-view conditioning for one example, planar channel-major.
/// Image channels are in [-1, 1]; a null bundle is all zeros.
template <typename T>
struct ConditioningBundle {
  std::vector<T> rgb;    ///< 3 x H x W
  std::vector<T> depth;  ///< H x W
  std::vector<T> mask;   ///< H x W
  std::array<T, 16> pose{};
  bool is_null = false;

  static ConditioningBundle null(int h, int w) {
    ConditioningBundle b;
    const auto hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    b.rgb.assign(3 * hw, T{});
    b.depth.assign(hw, T{});
    b.mask.assign(hw, T{});
    b.is_null = true;
    return b;
  }
};

/// rgb in [0,1] (interleaved) is remapped to [-1,1]; depth and mask are the
/// already-normalized single-channel maps.
template <typename T>
ConditioningBundle<T> make_bundle(const ImageF& rgb01, const ImageD& depth_norm, const ImageD& mask_norm,
                                  const RelativePose& pose) {
  const int w = rgb01.width, h = rgb01.height;
  if (rgb01.channels != 3 || depth_norm.width != w || depth_norm.height != h || mask_norm.width != w ||
      mask_norm.height != h)
    throw std::invalid_argument("make_bundle: conditioning image shapes disagree");
  ConditioningBundle<T> b;
  const auto hw = rgb01.pixel_count();
  b.rgb.resize(3 * hw);
  b.depth.resize(hw);
  b.mask.resize(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t c = 0; c < 3; ++c) b.rgb[c * hw + i] = static_cast<T>(2.0 * rgb01.data[i * 3 + c] - 1.0);
    b.depth[i] = static_cast<T>(depth_norm.data[i]);
    b.mask[i] = static_cast<T>(mask_norm.data[i]);
  }
  for (std::size_t k = 0; k < 16; ++k) b.pose[k] = static_cast<T>(pose.flat[k]);
  return b;
}

template <typename T>
struct DenoiserOutput {
  nn::Tensor<T> eps;   ///< 3 x N x H x W
  nn::Tensor<T> mask;  ///< 1 x N x H x W
};

/// Sinusoidal timestep features, (dim x N).
template <typename T>
nn::RowMat<T> timestep_embedding(const std::vector<int>& t, int dim) {
  const int half = dim / 2;
  nn::RowMat<T> e(dim, static_cast<Eigen::Index>(t.size()));
  for (std::size_t n = 0; n < t.size(); ++n)
    for (int k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * k / half);
      const double a = t[n] * freq;
      e(k, static_cast<Eigen::Index>(n)) = static_cast<T>(std::sin(a));
      e(half + k, static_cast<Eigen::Index>(n)) = static_cast<T>(std::cos(a));
    }
  return e;
}

/// View-conditioned noise predictor with an auxiliary target-view mask head.
/// The input is the channel concatenation [x_t | rgb | depth | mask]; the
/// timestep embedding is added at every stage and the relative pose enters
/// through a learned projection at the bottleneck. Both heads read the same
/// final feature map.
template <typename T>
class Denoiser {
 public:
  explicit Denoiser(ArchConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    const int c = cfg_.base_width, c2 = 2 * c, e = cfg_.embed_dim;
    time1_ = nn::Linear<T>(ps_, "time.fc1", cfg_.time_dim, e);
    time2_ = nn::Linear<T>(ps_, "time.fc2", e, e);
    pose1_ = nn::Linear<T>(ps_, "pose.fc1", ArchConfig::kPoseDim, e);
    pose2_ = nn::Linear<T>(ps_, "pose.fc2", e, c2);

    conv_in_ = nn::Conv2d<T>(ps_, "enc1.conv_in", ArchConfig::kInputChannels, c);
    t_e1_ = nn::Linear<T>(ps_, "enc1.time", e, c);
    conv_e1_ = nn::Conv2d<T>(ps_, "enc1.conv", c, c);
    down1_ = nn::Conv2d<T>(ps_, "enc2.down", c, c2, 3, 2);
    t_e2_ = nn::Linear<T>(ps_, "enc2.time", e, c2);
    conv_e2_ = nn::Conv2d<T>(ps_, "enc2.conv", c2, c2);
    down2_ = nn::Conv2d<T>(ps_, "mid.down", c2, c2, 3, 2);
    t_mid_ = nn::Linear<T>(ps_, "mid.time", e, c2);
    conv_mid_ = nn::Conv2d<T>(ps_, "mid.conv", c2, c2);
    conv_u2_ = nn::Conv2d<T>(ps_, "dec2.conv", 2 * c2, c2);
    t_u2_ = nn::Linear<T>(ps_, "dec2.time", e, c2);
    conv_u1_ = nn::Conv2d<T>(ps_, "dec1.conv", c2 + c, c);
    t_u1_ = nn::Linear<T>(ps_, "dec1.time", e, c);
    conv_final_ = nn::Conv2d<T>(ps_, "final.conv", c, c);
    head_eps_ = nn::Conv2d<T>(ps_, "head.eps", c, 3);
    head_mask_ = nn::Conv2d<T>(ps_, "head.mask", c, 1);
  }

  /// Deterministic initialization from a seed.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    for (const auto* l : {&time1_, &time2_, &pose1_, &pose2_, &t_e1_, &t_e2_, &t_mid_, &t_u2_, &t_u1_})
      l->init(ps_, rng);
    for (const auto* l : {&conv_in_, &conv_e1_, &down1_, &conv_e2_, &down2_, &conv_mid_, &conv_u2_, &conv_u1_,
                          &conv_final_, &head_eps_, &head_mask_})
      l->init(ps_, rng);
  }

  /// Zeroes both output heads (weights and biases).
  void zero_heads() {
    for (const auto* l : {&head_eps_, &head_mask_}) {
      std::fill(ps_[l->weight_index()].value.begin(), ps_[l->weight_index()].value.end(), T{});
      std::fill(ps_[l->bias_index()].value.begin(), ps_[l->bias_index()].value.end(), T{});
    }
  }

  /// Builds the 8-channel input tensor; ablated channels stay zero.
  nn::Tensor<T> assemble_input(const nn::Tensor<T>& x_t, const std::vector<ConditioningBundle<T>>& cond) const {
    const int h = cfg_.height, w = cfg_.width, n = x_t.n;
    if (x_t.c != 3 || x_t.h != h || x_t.w != w) throw std::invalid_argument("denoiser: x_t must be 3 x N x H x W");
    if (static_cast<int>(cond.size()) != n) throw std::invalid_argument("denoiser: one conditioning bundle per example");
    nn::Tensor<T> x(ArchConfig::kInputChannels, n, h, w);
    const std::size_t hw = x.spatial();
    std::copy(x_t.v.begin(), x_t.v.end(), x.v.begin());
    for (int i = 0; i < n; ++i) {
      const auto& b = cond[static_cast<std::size_t>(i)];
      if (b.rgb.size() != 3 * hw || b.depth.size() != hw || b.mask.size() != hw)
        throw std::invalid_argument("denoiser: conditioning bundle shape mismatch");
      for (int c = 0; c < 3; ++c)
        std::copy_n(b.rgb.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * hw), hw, &x.at(3 + c, i, 0, 0));
      if (cfg_.depth_input) std::copy_n(b.depth.begin(), hw, &x.at(6, i, 0, 0));
      if (cfg_.mask_input) std::copy_n(b.mask.begin(), hw, &x.at(7, i, 0, 0));
    }
    return x;
  }

  DenoiserOutput<T> forward(const nn::Tensor<T>& x_t, const std::vector<int>& t,
                            const std::vector<ConditioningBundle<T>>& cond) {
    if (static_cast<int>(t.size()) != x_t.n) throw std::invalid_argument("denoiser: one timestep per example");
    const nn::Tensor<T> x = assemble_input(x_t, cond);
    const auto n = static_cast<Eigen::Index>(x_t.n);

    nn::RowMat<T> pose(ArchConfig::kPoseDim, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < ArchConfig::kPoseDim; ++k) pose(k, i) = cond[static_cast<std::size_t>(i)].pose[static_cast<std::size_t>(k)];

    const nn::RowMat<T> temb = timestep_embedding<T>(t, cfg_.time_dim);
    const nn::RowMat<T> th = act_t2_.forward(time2_.forward(ps_, act_t1_.forward(time1_.forward(ps_, temb))));
    const nn::RowMat<T> pe = pose2_.forward(ps_, act_p1_.forward(pose1_.forward(ps_, pose)));

    auto h = conv_in_.forward(ps_, x);
    nn::add_channel_bias(h, t_e1_.forward(ps_, th));
    h = act_[0].forward(h);
    const auto e1 = act_[1].forward(conv_e1_.forward(ps_, h));

    h = down1_.forward(ps_, e1);
    nn::add_channel_bias(h, t_e2_.forward(ps_, th));
    h = act_[2].forward(h);
    const auto e2 = act_[3].forward(conv_e2_.forward(ps_, h));

    h = down2_.forward(ps_, e2);
    nn::add_channel_bias(h, nn::RowMat<T>(t_mid_.forward(ps_, th) + pe));
    h = act_[4].forward(h);
    const auto mid = act_[5].forward(conv_mid_.forward(ps_, h));

    h = conv_u2_.forward(ps_, nn::concat_channels(nn::upsample2x(mid), e2));
    nn::add_channel_bias(h, t_u2_.forward(ps_, th));
    const auto u2 = act_[6].forward(h);

    h = conv_u1_.forward(ps_, nn::concat_channels(nn::upsample2x(u2), e1));
    nn::add_channel_bias(h, t_u1_.forward(ps_, th));
    h = act_[7].forward(h);
    const auto feat = act_[8].forward(conv_final_.forward(ps_, h));

    return {head_eps_.forward(ps_, feat), head_mask_.forward(ps_, feat)};
  }

  /// Accumulates parameter gradients for the most recent forward pass.
  void backward(const nn::Tensor<T>& d_eps, const nn::Tensor<T>& d_mask) {
    const int c = cfg_.base_width, c2 = 2 * c;
    nn::Tensor<T> d_feat = head_eps_.backward(ps_, d_eps);
    {
      const auto dm = head_mask_.backward(ps_, d_mask);
      for (std::size_t i = 0; i < d_feat.v.size(); ++i) d_feat.v[i] += dm.v[i];
    }
    auto g = conv_final_.backward(ps_, act_[8].backward(d_feat));
    g = act_[7].backward(g);
    nn::RowMat<T> d_th = t_u1_.backward(ps_, nn::add_channel_bias_backward(g));
    auto [d_up_u2, d_e1] = nn::split_channels(conv_u1_.backward(ps_, g), c2);

    g = act_[6].backward(nn::upsample2x_backward(d_up_u2));
    d_th += t_u2_.backward(ps_, nn::add_channel_bias_backward(g));
    auto [d_up_mid, d_e2] = nn::split_channels(conv_u2_.backward(ps_, g), c2);

    g = conv_mid_.backward(ps_, act_[5].backward(nn::upsample2x_backward(d_up_mid)));
    g = act_[4].backward(g);
    const nn::RowMat<T> d_mid_bias = nn::add_channel_bias_backward(g);
    d_th += t_mid_.backward(ps_, d_mid_bias);
    pose1_.backward(ps_, act_p1_.backward(pose2_.backward(ps_, d_mid_bias)));
    add_inplace(d_e2, down2_.backward(ps_, g));

    g = conv_e2_.backward(ps_, act_[3].backward(d_e2));
    g = act_[2].backward(g);
    d_th += t_e2_.backward(ps_, nn::add_channel_bias_backward(g));
    add_inplace(d_e1, down1_.backward(ps_, g));

    g = conv_e1_.backward(ps_, act_[1].backward(d_e1));
    g = act_[0].backward(g);
    d_th += t_e1_.backward(ps_, nn::add_channel_bias_backward(g));
    conv_in_.backward(ps_, g);

    time1_.backward(ps_, act_t1_.backward(time2_.backward(ps_, act_t2_.backward(d_th))));
  }

  nn::ParamSet<T>& params() noexcept { return ps_; }
  const nn::ParamSet<T>& params() const noexcept { return ps_; }
  const ArchConfig& config() const noexcept { return cfg_; }
  std::size_t parameter_count() const { return ps_.count(); }

 private:
  static void add_inplace(nn::Tensor<T>& a, const nn::Tensor<T>& b) {
    nn::require_same_shape(a, b, "denoiser backward");
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
  }

  ArchConfig cfg_;
  nn::ParamSet<T> ps_;
  nn::Linear<T> time1_, time2_, pose1_, pose2_;
  nn::Linear<T> t_e1_, t_e2_, t_mid_, t_u2_, t_u1_;
  nn::Conv2d<T> conv_in_, conv_e1_, down1_, conv_e2_, down2_, conv_mid_, conv_u2_, conv_u1_, conv_final_;
  nn::Conv2d<T> head_eps_, head_mask_;
  nn::SiLU<T> act_t1_, act_t2_, act_p1_;
  std::array<nn::SiLU<T>, 9> act_;
};

struct LossTerms {
  double total = 0.0;
  double diffusion = 0.0;
  double mask = 0.0;
};

/// mean (eps_hat - eps)^2 + gamma * mean (mask_gt - mask_hat)^2, plus the
/// matching output gradients.
template <typename T>
LossTerms denoiser_loss(const DenoiserOutput<T>& out, const nn::Tensor<T>& eps, const nn::Tensor<T>& mask_gt,
                        double gamma, nn::Tensor<T>* d_eps = nullptr, nn::Tensor<T>* d_mask = nullptr) {
  nn::require_same_shape(out.eps, eps, "loss (eps)");
  nn::require_same_shape(out.mask, mask_gt, "loss (mask)");
  LossTerms l;
  const double ne = static_cast<double>(eps.size()), nm = static_cast<double>(mask_gt.size());
  for (std::size_t i = 0; i < eps.v.size(); ++i) {
    const double d = static_cast<double>(out.eps.v[i]) - eps.v[i];
    l.diffusion += d * d;
  }
  for (std::size_t i = 0; i < mask_gt.v.size(); ++i) {
    const double d = static_cast<double>(out.mask.v[i]) - mask_gt.v[i];
    l.mask += d * d;
  }
  l.diffusion /= ne;
  l.mask /= nm;
  l.total = l.diffusion + gamma * l.mask;
  if (d_eps) {
    *d_eps = out.eps;
    for (std::size_t i = 0; i < eps.v.size(); ++i) d_eps->v[i] = static_cast<T>(2.0 * (out.eps.v[i] - eps.v[i]) / ne);
  }
  if (d_mask) {
    *d_mask = out.mask;
    for (std::size_t i = 0; i < mask_gt.v.size(); ++i)
      d_mask->v[i] = static_cast<T>(2.0 * gamma * (out.mask.v[i] - mask_gt.v[i]) / nm);
  }
  return l;
}

}  // namespace nvskit

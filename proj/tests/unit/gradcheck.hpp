#pragma once

// Central finite-difference checks shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nvskit/denoiser.hpp"
#include "nvskit/nn/layers.hpp"

namespace gradcheck {

struct Result {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Relative error with a small floor so that entries where both gradients are
/// numerically zero do not dominate.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7});
}

/// Perturbs every entry of `values` in place and compares against `analytic`.
inline Result compare(std::vector<double>& values, const std::vector<double>& analytic,
                      const std::function<double()>& loss, double h = 1e-5) {
  Result r;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + h;
    const double up = loss();
    values[i] = keep - h;
    const double down = loss();
    values[i] = keep;
    r.max_rel_error = std::max(r.max_rel_error, rel_error(analytic[i], (up - down) / (2 * h)));
    ++r.checked;
  }
  return r;
}

inline Result merge(Result a, const Result& b) {
  a.max_rel_error = std::max(a.max_rel_error, b.max_rel_error);
  a.checked += b.checked;
  return a;
}

inline nvskit::nn::Tensor<double> random_tensor(int c, int n, int h, int w, nvskit::Rng& rng) {
  nvskit::nn::Tensor<double> t(c, n, h, w);
  for (auto& v : t.v) v = rng.normal();
  return t;
}

inline nvskit::nn::RowMat<double> random_mat(int rows, int cols, nvskit::Rng& rng) {
  nvskit::nn::RowMat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Conv2d: parameters and input, loss = <weights, y>.
inline Result check_conv(int in_c, int out_c, int kernel, int stride, std::uint64_t seed) {
  using namespace nvskit::nn;
  nvskit::Rng rng(seed);
  ParamSet<double> ps;
  Conv2d<double> conv(ps, "conv", in_c, out_c, kernel, stride);
  conv.init(ps, rng);
  auto x = random_tensor(in_c, 2, 6, 6, rng);
  auto y0 = conv.forward(ps, x);
  const auto probe = random_tensor(y0.c, y0.n, y0.h, y0.w, rng);
  ps.zero_grad();
  const auto dx = conv.backward(ps, probe);
  auto loss = [&] { return dot(conv.forward(ps, x).v, probe.v); };
  Result r = compare(x.v, dx.v, loss);
  for (auto& p : ps) {
    const auto g = p.grad;
    r = merge(r, compare(p.value, g, loss));
  }
  return r;
}

inline Result check_linear(std::uint64_t seed) {
  using namespace nvskit::nn;
  nvskit::Rng rng(seed);
  ParamSet<double> ps;
  Linear<double> lin(ps, "fc", 5, 4);
  lin.init(ps, rng);
  RowMat<double> x = random_mat(5, 3, rng);
  const RowMat<double> probe = random_mat(4, 3, rng);
  lin.forward(ps, x);
  ps.zero_grad();
  const RowMat<double> dx = lin.backward(ps, probe);
  auto loss = [&] { return (lin.forward(ps, x).array() * probe.array()).sum(); };
  std::vector<double> xv(x.data(), x.data() + x.size());
  const std::vector<double> dxv(dx.data(), dx.data() + dx.size());
  auto loss_x = [&] {
    std::copy(xv.begin(), xv.end(), x.data());
    return loss();
  };
  Result r = compare(xv, dxv, loss_x);
  std::copy(xv.begin(), xv.end(), x.data());
  for (auto& p : ps) {
    const auto g = p.grad;
    r = merge(r, compare(p.value, g, loss));
  }
  return r;
}

inline Result check_silu(std::uint64_t seed) {
  using namespace nvskit::nn;
  nvskit::Rng rng(seed);
  SiLU<double> act;
  auto x = random_tensor(2, 2, 3, 3, rng);
  const auto probe = random_tensor(2, 2, 3, 3, rng);
  act.forward(x);
  const auto dx = act.backward(probe);
  Result r = compare(x.v, dx.v, [&] { return dot(act.forward(x).v, probe.v); });

  RowMat<double> m = random_mat(4, 3, rng);
  const RowMat<double> pm = random_mat(4, 3, rng);
  act.forward(m);
  const RowMat<double> dm = act.backward(pm);
  std::vector<double> mv(m.data(), m.data() + m.size());
  const std::vector<double> dmv(dm.data(), dm.data() + dm.size());
  return merge(r, compare(mv, dmv, [&] {
                 std::copy(mv.begin(), mv.end(), m.data());
                 return (act.forward(m).array() * pm.array()).sum();
               }));
}

inline Result check_upsample(std::uint64_t seed) {
  using namespace nvskit::nn;
  nvskit::Rng rng(seed);
  auto x = random_tensor(2, 2, 3, 3, rng);
  const auto probe = random_tensor(2, 2, 6, 6, rng);
  const auto dx = upsample2x_backward(probe);
  return compare(x.v, dx.v, [&] { return dot(upsample2x(x).v, probe.v); });
}

inline Result check_channel_bias(std::uint64_t seed) {
  using namespace nvskit::nn;
  nvskit::Rng rng(seed);
  const auto x = random_tensor(3, 2, 4, 4, rng);
  RowMat<double> e = random_mat(3, 2, rng);
  const auto probe = random_tensor(3, 2, 4, 4, rng);
  const RowMat<double> de = add_channel_bias_backward(probe);
  std::vector<double> ev(e.data(), e.data() + e.size());
  const std::vector<double> dev(de.data(), de.data() + de.size());
  return compare(ev, dev, [&] {
    std::copy(ev.begin(), ev.end(), e.data());
    auto y = x;
    add_channel_bias(y, e);
    return dot(y.v, probe.v);
  });
}

/// About 1k parameters at 8 x 8.
inline nvskit::ArchConfig mini_arch() {
  nvskit::ArchConfig a;
  a.height = a.width = 8;
  a.base_width = 1;
  a.time_dim = 16;
  a.embed_dim = 8;
  return a;
}

/// Whole network: every parameter, loss = diffusion + gamma * mask term.
inline Result check_denoiser(std::uint64_t seed, std::size_t* param_count = nullptr) {
  using namespace nvskit;
  const ArchConfig arch = mini_arch();
  Denoiser<double> net(arch);
  net.init(seed);
  Rng rng(seed + 1);
  const int n = 2, h = arch.height, w = arch.width;
  const auto x_t = random_tensor(3, n, h, w, rng);
  const auto eps = random_tensor(3, n, h, w, rng);
  const auto mask = random_tensor(1, n, h, w, rng);
  std::vector<ConditioningBundle<double>> cond;
  for (int i = 0; i < n; ++i) {
    ConditioningBundle<double> b = ConditioningBundle<double>::null(h, w);
    b.is_null = false;
    for (auto* v : {&b.rgb, &b.depth, &b.mask})
      for (auto& e : *v) e = rng.uniform(-1, 1);
    for (auto& e : b.pose) e = rng.uniform(-1, 1);
    cond.push_back(b);
  }
  const std::vector<int> t = {17, 640};
  const double gamma = 0.5;

  net.params().zero_grad();
  nn::Tensor<double> d_eps, d_mask;
  denoiser_loss(net.forward(x_t, t, cond), eps, mask, gamma, &d_eps, &d_mask);
  net.backward(d_eps, d_mask);

  auto loss = [&] { return denoiser_loss(net.forward(x_t, t, cond), eps, mask, gamma).total; };
  Result r;
  // Deep-layer gradients reach 1e-7 against an O(1) loss; a larger step keeps
  // cancellation error below the tolerance.
  for (auto& p : net.params()) {
    const auto g = p.grad;
    r = merge(r, compare(p.value, g, loss, 1e-4));
  }
  if (param_count) *param_count = net.parameter_count();
  return r;
}

}  // namespace gradcheck

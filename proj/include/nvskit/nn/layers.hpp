#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>
#include <algorithm>

#include <Eigen/Dense>

#include "nvskit/nn/params.hpp"
#include "nvskit/nn/tensor.hpp"

namespace nvskit::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

/// Square convolution (kernel 1 or 3, "same" padding, stride 1 or 2) via
/// im2col + GEMM. Keeps its last input columns for the backward pass.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamSet<T>& ps, const std::string& name, int in_c, int out_c, int kernel = 3, int stride = 1)
      : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(kernel / 2) {
    if (kernel != 1 && kernel != 3) throw std::invalid_argument("Conv2d: kernel must be 1 or 3");
    if (stride != 1 && stride != 2) throw std::invalid_argument("Conv2d: stride must be 1 or 2");
    w_ = ps.add(name + ".weight", {out_c, in_c, kernel, kernel});
    b_ = ps.add(name + ".bias", {out_c});
  }

  void init(ParamSet<T>& ps, Rng& rng) const {
    const auto fan_in = static_cast<std::size_t>(in_c_ * k_ * k_);
    init_uniform_fan_in(ps[w_].value, fan_in, rng);
    init_uniform_fan_in(ps[b_].value, fan_in, rng);
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x) {
    if (x.c != in_c_) throw std::invalid_argument("Conv2d: expected " + std::to_string(in_c_) + " input channels");
    in_n_ = x.n;
    in_h_ = x.h;
    in_w_ = x.w;
    out_h_ = (x.h + 2 * pad_ - k_) / stride_ + 1;
    out_w_ = (x.w + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t m = static_cast<std::size_t>(x.n) * out_h_ * out_w_;
    im2col(x);
    Tensor<T> y(out_c_, x.n, out_h_, out_w_);
    ConstMatMap<T> wm(ps[w_].value.data(), out_c_, kdim());
    ConstMatMap<T> cols(cols_.data(), kdim(), static_cast<Eigen::Index>(m));
    MatMap<T> ym(y.v.data(), out_c_, static_cast<Eigen::Index>(m));
    ym.noalias() = wm * cols;
    const auto& b = ps[b_].value;
    for (int o = 0; o < out_c_; ++o) ym.row(o).array() += b[static_cast<std::size_t>(o)];
    return y;
  }

  Tensor<T> backward(ParamSet<T>& ps, const Tensor<T>& dy) {
    const auto m = static_cast<Eigen::Index>(static_cast<std::size_t>(in_n_) * out_h_ * out_w_);
    ConstMatMap<T> dym(dy.v.data(), out_c_, m);
    ConstMatMap<T> cols(cols_.data(), kdim(), m);
    MatMap<T> dw(ps[w_].grad.data(), out_c_, kdim());
    dw.noalias() += dym * cols.transpose();
    auto& db = ps[b_].grad;
    // Plain loop: Eigen's vectorized redux peels by pointer alignment, which
    // would make the result depend on where the allocator put the buffer.
    for (int o = 0; o < out_c_; ++o) {
      const T* row = dy.v.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(m);
      db[static_cast<std::size_t>(o)] += std::accumulate(row, row + m, T{});
    }

    ConstMatMap<T> wm(ps[w_].value.data(), out_c_, kdim());
    std::vector<T> dcols(static_cast<std::size_t>(kdim()) * static_cast<std::size_t>(m));
    MatMap<T> dc(dcols.data(), kdim(), m);
    dc.noalias() = wm.transpose() * dym;
    return col2im(dcols);
  }

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }
  std::size_t weight_index() const { return w_; }
  std::size_t bias_index() const { return b_; }

 private:
  Eigen::Index kdim() const { return static_cast<Eigen::Index>(in_c_) * k_ * k_; }

  // Valid output-column range [lo, hi) for kernel offset k along an axis.
  std::pair<int, int> valid_range(int k, int in_len, int out_len) const {
    int lo = 0;
    while (lo < out_len && lo * stride_ + k - pad_ < 0) ++lo;
    int hi = out_len;
    while (hi > lo && (hi - 1) * stride_ + k - pad_ >= in_len) --hi;
    return {lo, hi};
  }

  void im2col(const Tensor<T>& x) {
    const std::size_t m = static_cast<std::size_t>(x.n) * out_h_ * out_w_;
    cols_.resize(static_cast<std::size_t>(kdim()) * m);
    for (int ci = 0; ci < in_c_; ++ci)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          T* row = cols_.data() + (static_cast<std::size_t>(ci * k_ * k_ + ky * k_ + kx)) * m;
          const auto [xlo, xhi] = valid_range(kx, x.w, out_w_);
          for (int n = 0; n < x.n; ++n)
            for (int oy = 0; oy < out_h_; ++oy) {
              T* dst = row + (static_cast<std::size_t>(n) * out_h_ + oy) * out_w_;
              const int iy = oy * stride_ + ky - pad_;
              if (iy < 0 || iy >= x.h) {
                std::fill(dst, dst + out_w_, T{});
                continue;
              }
              std::fill(dst, dst + xlo, T{});
              std::fill(dst + xhi, dst + out_w_, T{});
              const T* src = &x.v[static_cast<std::size_t>(ci) * x.plane() + static_cast<std::size_t>(n) * x.spatial() +
                                  static_cast<std::size_t>(iy) * x.w];
              if (stride_ == 1) {
                std::copy(src + xlo + kx - pad_, src + xhi + kx - pad_, dst + xlo);
              } else {
                for (int ox = xlo; ox < xhi; ++ox) dst[ox] = src[ox * stride_ + kx - pad_];
              }
            }
        }
  }

  Tensor<T> col2im(const std::vector<T>& dcols) const {
    Tensor<T> dx(in_c_, in_n_, in_h_, in_w_);
    const std::size_t m = static_cast<std::size_t>(in_n_) * out_h_ * out_w_;
    for (int ci = 0; ci < in_c_; ++ci)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const T* row = dcols.data() + (static_cast<std::size_t>(ci * k_ * k_ + ky * k_ + kx)) * m;
          const auto [xlo, xhi] = valid_range(kx, in_w_, out_w_);
          for (int n = 0; n < in_n_; ++n)
            for (int oy = 0; oy < out_h_; ++oy) {
              const int iy = oy * stride_ + ky - pad_;
              if (iy < 0 || iy >= in_h_) continue;
              const T* src = row + (static_cast<std::size_t>(n) * out_h_ + oy) * out_w_;
              T* dst = &dx.v[static_cast<std::size_t>(ci) * dx.plane() + static_cast<std::size_t>(n) * dx.spatial() +
                             static_cast<std::size_t>(iy) * in_w_];
              for (int ox = xlo; ox < xhi; ++ox) dst[ox * stride_ + kx - pad_] += src[ox];
            }
        }
    return dx;
  }

  int in_c_ = 0, out_c_ = 0, k_ = 3, stride_ = 1, pad_ = 1;
  std::size_t w_ = 0, b_ = 0;
  int in_n_ = 0, in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  std::vector<T> cols_;
};

/// Feature-major dense layer: input (in x N), output (out x N).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamSet<T>& ps, const std::string& name, int in, int out) : in_(in), out_(out) {
    w_ = ps.add(name + ".weight", {out, in});
    b_ = ps.add(name + ".bias", {out});
  }

  void init(ParamSet<T>& ps, Rng& rng) const {
    init_uniform_fan_in(ps[w_].value, static_cast<std::size_t>(in_), rng);
    init_uniform_fan_in(ps[b_].value, static_cast<std::size_t>(in_), rng);
  }

  RowMat<T> forward(const ParamSet<T>& ps, const RowMat<T>& x) {
    if (x.rows() != in_) throw std::invalid_argument("Linear: input feature mismatch");
    x_ = x;
    ConstMatMap<T> wm(ps[w_].value.data(), out_, in_);
    RowMat<T> y = wm * x;
    for (int o = 0; o < out_; ++o) y.row(o).array() += ps[b_].value[static_cast<std::size_t>(o)];
    return y;
  }

  RowMat<T> backward(ParamSet<T>& ps, const RowMat<T>& dy) {
    MatMap<T> dw(ps[w_].grad.data(), out_, in_);
    dw.noalias() += dy * x_.transpose();
    for (int o = 0; o < out_; ++o) {
      T acc{};
      for (Eigen::Index k = 0; k < dy.cols(); ++k) acc += dy(o, k);
      ps[b_].grad[static_cast<std::size_t>(o)] += acc;
    }
    ConstMatMap<T> wm(ps[w_].value.data(), out_, in_);
    return wm.transpose() * dy;
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  std::size_t w_ = 0, b_ = 0;
  RowMat<T> x_;
};

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

/// x * sigmoid(x), elementwise.
template <typename T>
class SiLU {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x.v;
    Tensor<T> y = x;
    for (auto& v : y.v) v = v * sigmoid(v);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i) {
      const T s = sigmoid(x_[i]);
      dx.v[i] *= s + x_[i] * s * (T(1) - s);
    }
    return dx;
  }
  RowMat<T> forward(const RowMat<T>& x) {
    xm_ = x;
    return x.unaryExpr([](T v) { return v * sigmoid(v); });
  }
  RowMat<T> backward(const RowMat<T>& dy) const {
    return dy.binaryExpr(xm_, [](T g, T v) {
      const T s = sigmoid(v);
      return g * (s + v * s * (T(1) - s));
    });
  }

 private:
  std::vector<T> x_;
  RowMat<T> xm_;
};

/// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  Tensor<T> y(x.c, x.n, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c)
    for (int n = 0; n < x.n; ++n)
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx) y.at(c, n, yy, xx) = x.at(c, n, yy / 2, xx / 2);
  return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.c, dy.n, dy.h / 2, dy.w / 2);
  for (int c = 0; c < dy.c; ++c)
    for (int n = 0; n < dy.n; ++n)
      for (int yy = 0; yy < dy.h; ++yy)
        for (int xx = 0; xx < dy.w; ++xx) dx.at(c, n, yy / 2, xx / 2) += dy.at(c, n, yy, xx);
  return dx;
}

/// Adds a per-(channel, example) offset e (C x N) to every pixel of x.
template <typename T>
void add_channel_bias(Tensor<T>& x, const RowMat<T>& e) {
  if (e.rows() != x.c || e.cols() != x.n) throw std::invalid_argument("add_channel_bias: shape mismatch");
  const std::size_t hw = x.spatial();
  for (int c = 0; c < x.c; ++c)
    for (int n = 0; n < x.n; ++n) {
      T* p = &x.at(c, n, 0, 0);
      const T b = e(c, n);
      for (std::size_t i = 0; i < hw; ++i) p[i] += b;
    }
}

template <typename T>
RowMat<T> add_channel_bias_backward(const Tensor<T>& dy) {
  RowMat<T> de(dy.c, dy.n);
  const std::size_t hw = dy.spatial();
  for (int c = 0; c < dy.c; ++c)
    for (int n = 0; n < dy.n; ++n) {
      const T* p = &dy.at(c, n, 0, 0);
      T s{};
      for (std::size_t i = 0; i < hw; ++i) s += p[i];
      de(c, n) = s;
    }
  return de;
}

}  // namespace nvskit::nn

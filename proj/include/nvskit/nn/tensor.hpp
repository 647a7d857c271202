#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>
#include <algorithm>

namespace nvskit::nn {

/// Activation tensor in channel-major layout [C][N][H][W], so a convolution's
/// GEMM output (C_out x N*H*W) is already in place and channel concatenation
/// is a plain append.
template <typename T>
struct Tensor {
  int c = 0, n = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c_, int n_, int h_, int w_, T fill = T{})
      : c(c_), n(n_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * n_ * h_ * w_, fill) {}

  std::size_t spatial() const noexcept { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(n) * spatial(); }
  std::size_t size() const noexcept { return v.size(); }
  bool same_shape(const Tensor& o) const noexcept { return c == o.c && n == o.n && h == o.h && w == o.w; }

  T& at(int ci, int ni, int y, int x) noexcept {
    return v[static_cast<std::size_t>(ci) * plane() + static_cast<std::size_t>(ni) * spatial() +
             static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
  }
  const T& at(int ci, int ni, int y, int x) const noexcept {
    return const_cast<Tensor*>(this)->at(ci, ni, y, x);
  }
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": tensor shape mismatch");
}

/// Concatenation along channels.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw std::invalid_argument("concat_channels: shape mismatch");
  Tensor<T> out;
  out.c = a.c + b.c;
  out.n = a.n;
  out.h = a.h;
  out.w = a.w;
  out.v.reserve(a.v.size() + b.v.size());
  out.v.insert(out.v.end(), a.v.begin(), a.v.end());
  out.v.insert(out.v.end(), b.v.begin(), b.v.end());
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int first) {
  Tensor<T> a(first, x.n, x.h, x.w), b(x.c - first, x.n, x.h, x.w);
  const auto cut = x.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(first) * x.plane());
  std::copy(x.v.begin(), cut, a.v.begin());
  std::copy(cut, x.v.end(), b.v.begin());
  return {std::move(a), std::move(b)};
}

}  // namespace nvskit::nn

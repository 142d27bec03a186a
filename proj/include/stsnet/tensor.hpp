// Copyright 2026 The stsnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STSNET_TENSOR_HPP_
#define STSNET_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "stsnet/common.hpp"

namespace stsnet {

// Dense n-dimensional array, row-major flat storage. The single numeric
// currency of the engine; `T` is float for training builds and double for
// gradient-check builds.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), T(0)) {}

  Tensor(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != static_cast<int64_t>(data_.size()))
      throw dimension_error("tensor data length " +
                            std::to_string(data_.size()) +
                            " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor ones(std::vector<int> shape) {
    return full(std::move(shape), T(1));
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Reinterprets the flat data under a new shape of equal size.
  Tensor reshaped(std::vector<int> shape) const {
    Tensor t;
    t.shape_ = std::move(shape);
    if (checked_size(t.shape_) != size())
      throw dimension_error("reshape " + shape_str(shape_) + " -> " +
                            shape_str(t.shape_) + ": size mismatch");
    t.data_ = data_;
    return t;
  }

 private:
  static int64_t checked_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d <= 0)
        throw dimension_error("non-positive dimension in shape " +
                              shape_str(shape));
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* what) {
  if (!a.same_shape(b))
    throw dimension_error(std::string(what) + ": shape " +
                          shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// Elementwise helpers. Accumulation order is always the flat index order so
// reruns are bit-identical.

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  for (int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
void axpy_inplace(Tensor<T>& a, T s, const Tensor<T>& b) {
  check_same_shape(a, b, "axpy");
  for (int64_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = a;
  add_inplace(out, b);
  return out;
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "hadamard");
  Tensor<T> out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

template <typename T>
Tensor<T> scaled(const Tensor<T>& a, T s) {
  Tensor<T> out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

template <typename T>
T sum(const Tensor<T>& a) {
  T s = 0;
  for (int64_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

template <typename T>
T max_abs(const Tensor<T>& a) {
  T m = 0;
  for (int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i]));
  return m;
}

// ---------------------------------------------------------------------------
// Matrix products. a is [m x k], b is [k x p]. The ikj loop keeps the inner
// traversal contiguous for both b and out.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw dimension_error("matmul: " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), p = b.dim(1);
  Tensor<T> out({m, p});
  const T* ad = a.data();
  const T* bd = b.data();
  T* od = out.data();
  for (int i = 0; i < m; ++i) {
    T* __restrict orow = od + static_cast<int64_t>(i) * p;
    for (int kk = 0; kk < k; ++kk) {
      const T av = ad[static_cast<int64_t>(i) * k + kk];
      if (av == T(0)) continue;
      const T* __restrict brow = bd + static_cast<int64_t>(kk) * p;
      for (int j = 0; j < p; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> transposed(const Tensor<T>& a) {
  if (a.ndim() != 2)
    throw dimension_error("transpose: " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  Tensor<T> out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<int64_t>(j) * m + i] = a[static_cast<int64_t>(i) * n + j];
  return out;
}

// out[m x p] = a[k x m]^T . b[k x p]
template <typename T>
Tensor<T> matmul_at_b(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(0) != b.dim(0))
    throw dimension_error("matmul_at_b: " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
  const int k = a.dim(0), m = a.dim(1), p = b.dim(1);
  Tensor<T> out({m, p});
  const T* ad = a.data();
  const T* bd = b.data();
  T* od = out.data();
  for (int kk = 0; kk < k; ++kk) {
    const T* arow = ad + static_cast<int64_t>(kk) * m;
    const T* __restrict brow = bd + static_cast<int64_t>(kk) * p;
    for (int i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* __restrict orow = od + static_cast<int64_t>(i) * p;
      for (int j = 0; j < p; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

// out[m x p] = a[m x k] . b[p x k]^T. Goes through an explicit transpose so
// the inner update is the same vector-friendly row saxpy as matmul.
template <typename T>
Tensor<T> matmul_a_bt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
    throw dimension_error("matmul_a_bt: " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
  return matmul(a, transposed(b));
}

// y[out] = w[out x in] . x[in]
template <typename T>
Tensor<T> matvec(const Tensor<T>& w, const Tensor<T>& x) {
  if (w.ndim() != 2 || w.dim(1) != x.size())
    throw dimension_error("matvec: " + shape_str(w.shape()) + " x vector[" +
                          std::to_string(x.size()) + "]");
  const int m = w.dim(0), k = w.dim(1);
  Tensor<T> out({m});
  const T* wd = w.data();
  const T* xd = x.data();
  for (int i = 0; i < m; ++i) {
    const T* row = wd + static_cast<int64_t>(i) * k;
    T acc = 0;
    for (int kk = 0; kk < k; ++kk) acc += row[kk] * xd[kk];
    out[i] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, no kernel flip). x is [Cin x H x W],
// w is [Cout x Cin x kh x kw]. Output size must divide exactly.

struct ConvDims {
  int c_in, h, w, c_out, kh, kw, ho, wo;
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, int stride,
                   int pad) {
  if (x.ndim() != 3 || w.ndim() != 4)
    throw dimension_error("conv2d: input " + shape_str(x.shape()) +
                          ", kernel " + shape_str(w.shape()));
  ConvDims d;
  d.c_in = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  d.c_out = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  if (w.dim(1) != d.c_in)
    throw dimension_error("conv2d: input channels " + std::to_string(d.c_in) +
                          " vs kernel " + shape_str(w.shape()));
  if (stride < 1 || pad < 0) throw parameter_error("conv2d: bad stride/pad");
  if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad)
    throw dimension_error("conv2d: kernel " + shape_str(w.shape()) +
                          " larger than padded input " + shape_str(x.shape()));
  int num_h = d.h + 2 * pad - d.kh;
  int num_w = d.w + 2 * pad - d.kw;
  if (num_h % stride != 0 || num_w % stride != 0)
    throw dimension_error("conv2d: non-integral output for input " +
                          shape_str(x.shape()) + ", kernel " +
                          shape_str(w.shape()) + ", stride " +
                          std::to_string(stride) + ", pad " +
                          std::to_string(pad));
  d.ho = num_h / stride + 1;
  d.wo = num_w / stride + 1;
  return d;
}

// col is [Cin*kh*kw x Ho*Wo].
template <typename T>
void im2col(const Tensor<T>& x, const ConvDims& d, int stride, int pad,
            Tensor<T>& col) {
  const int cols = d.ho * d.wo;
  T* cd = col.data();
  const T* xd = x.data();
  int row = 0;
  for (int c = 0; c < d.c_in; ++c) {
    const T* xc = xd + static_cast<int64_t>(c) * d.h * d.w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx, ++row) {
        T* crow = cd + static_cast<int64_t>(row) * cols;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          T* dst = crow + static_cast<int64_t>(oy) * d.wo;
          if (iy < 0 || iy >= d.h) {
            std::fill(dst, dst + d.wo, T(0));
            continue;
          }
          const T* xrow = xc + static_cast<int64_t>(iy) * d.w;
          if (stride == 1) {
            // valid ox span: 0 <= ox + kx - pad < w
            const int lo = std::max(0, pad - kx);
            const int hi = std::min(d.wo, d.w - kx + pad);
            std::fill(dst, dst + lo, T(0));
            if (hi > lo) std::copy(xrow + lo + kx - pad, xrow + hi + kx - pad, dst + lo);
            std::fill(dst + std::max(lo, hi), dst + d.wo, T(0));
          } else {
            for (int ox = 0; ox < d.wo; ++ox) {
              const int ix = ox * stride + kx - pad;
              dst[ox] = (ix >= 0 && ix < d.w) ? xrow[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const Tensor<T>& col, const ConvDims& d, int stride, int pad,
            Tensor<T>& x) {
  const int cols = d.ho * d.wo;
  const T* cd = col.data();
  T* xd = x.data();
  std::fill(x.vec().begin(), x.vec().end(), T(0));
  int row = 0;
  for (int c = 0; c < d.c_in; ++c) {
    T* xc = xd + static_cast<int64_t>(c) * d.h * d.w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx, ++row) {
        const T* crow = cd + static_cast<int64_t>(row) * cols;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= d.h) continue;
          T* xrow = xc + static_cast<int64_t>(iy) * d.w;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < d.w) xrow[ix] += crow[oy * d.wo + ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
  ConvDims d = conv_dims(x, w, stride, pad);
  Tensor<T> col({d.c_in * d.kh * d.kw, d.ho * d.wo});
  im2col(x, d, stride, pad, col);
  Tensor<T> wm = w.reshaped({d.c_out, d.c_in * d.kh * d.kw});
  Tensor<T> y = matmul(wm, col);
  return y.reshaped({d.c_out, d.ho, d.wo});
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& gy, int stride, int pad, Tensor<T>* gx,
                     Tensor<T>* gw) {
  ConvDims d = conv_dims(x, w, stride, pad);
  Tensor<T> gym = gy.reshaped({d.c_out, d.ho * d.wo});
  Tensor<T> col({d.c_in * d.kh * d.kw, d.ho * d.wo});
  im2col(x, d, stride, pad, col);
  if (gw) {
    Tensor<T> g = matmul_a_bt(gym, col);  // [Cout x Cin*kh*kw]
    *gw = g.reshaped({d.c_out, d.c_in, d.kh, d.kw});
  }
  if (gx) {
    Tensor<T> wm = w.reshaped({d.c_out, d.c_in * d.kh * d.kw});
    Tensor<T> gcol = matmul_at_b(wm, gym);  // [Cin*kh*kw x Ho*Wo]
    *gx = Tensor<T>(x.shape());
    col2im(gcol, d, stride, pad, *gx);
  }
}

// ---------------------------------------------------------------------------
// Pooling. x is [C x H x W]; k must divide both spatial dims.

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, int k) {
  if (x.ndim() != 3) throw dimension_error("avg_pool: input " + shape_str(x.shape()));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (k < 1 || h % k != 0 || w % k != 0)
    throw dimension_error("avg_pool: k=" + std::to_string(k) +
                          " does not divide " + shape_str(x.shape()));
  const int ho = h / k, wo = w / k;
  Tensor<T> out({c, ho, wo});
  const T inv = T(1) / static_cast<T>(k * k);
  for (int ci = 0; ci < c; ++ci) {
    const T* xc = x.data() + static_cast<int64_t>(ci) * h * w;
    T* oc = out.data() + static_cast<int64_t>(ci) * ho * wo;
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T acc = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            acc += xc[(oy * k + dy) * w + (ox * k + dx)];
        oc[oy * wo + ox] = acc * inv;
      }
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool_backward(const Tensor<T>& gy, const std::vector<int>& x_shape,
                            int k) {
  const int c = x_shape[0], h = x_shape[1], w = x_shape[2];
  const int ho = h / k, wo = w / k;
  Tensor<T> gx(x_shape);
  const T inv = T(1) / static_cast<T>(k * k);
  for (int ci = 0; ci < c; ++ci) {
    const T* gc = gy.data() + static_cast<int64_t>(ci) * ho * wo;
    T* xc = gx.data() + static_cast<int64_t>(ci) * h * w;
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        const T g = gc[oy * wo + ox] * inv;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            xc[(oy * k + dy) * w + (ox * k + dx)] += g;
      }
  }
  return gx;
}

// Per-channel spatial mean; x [C x H x W] -> [C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.ndim() != 3)
    throw dimension_error("global_avg_pool: input " + shape_str(x.shape()));
  const int c = x.dim(0);
  const int64_t hw = static_cast<int64_t>(x.dim(1)) * x.dim(2);
  Tensor<T> out({c});
  const T inv = T(1) / static_cast<T>(hw);
  for (int ci = 0; ci < c; ++ci) {
    const T* xc = x.data() + ci * hw;
    T acc = 0;
    for (int64_t i = 0; i < hw; ++i) acc += xc[i];
    out[ci] = acc * inv;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout mask: Bernoulli(1-rate) with inverted scaling, values 0 or
// 1/(1-rate). One mask is drawn per sample window, not per time step.

template <typename T>
Tensor<T> dropout_mask(const std::vector<int>& shape, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw parameter_error("dropout rate " + std::to_string(rate) +
                          " outside [0,1)");
  Tensor<T> m(shape);
  if (rate == 0.0) {
    std::fill(m.vec().begin(), m.vec().end(), T(1));
    return m;
  }
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (int64_t i = 0; i < m.size(); ++i)
    m[i] = rng.uniform() >= rate ? keep : T(0);
  return m;
}

// ---------------------------------------------------------------------------
// Central-difference gradient check. `analytic` is the gradient the tape
// produced for f at x; returns the max elementwise relative error against
// central differences. Callers must keep f away from activation kinks
// (pre-activations more than ~10*eps from the threshold).

template <typename T, typename F>
T finite_diff_check(F&& f, const Tensor<T>& x, const Tensor<T>& analytic,
                    T eps) {
  check_same_shape(x, analytic, "finite_diff_check");
  Tensor<T> probe = x;
  T worst = 0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + eps;
    const T fp = f(probe);
    probe[i] = orig - eps;
    const T fm = f(probe);
    probe[i] = orig;
    const T fd = (fp - fm) / (2 * eps);
    const T denom = std::max(
        {std::abs(analytic[i]), std::abs(fd), static_cast<T>(1e-12)});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

}  // namespace stsnet

#endif  // STSNET_TENSOR_HPP_

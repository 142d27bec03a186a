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

#ifndef STSNET_TAPE_HPP_
#define STSNET_TAPE_HPP_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stsnet/lif.hpp"
#include "stsnet/tensor.hpp"

namespace stsnet {

// Reverse-mode gradient tape. Each recorded op appends one node whose inputs
// were recorded earlier, so creation order is a topological order and
// backward() is a single reverse sweep that visits every node exactly once.
// A tape instance is single-threaded; batch parallelism runs one tape per
// sample.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constants (inputs, targets) can opt out of gradient propagation; the
  // backward sweep then skips every value that only depends on them.
  int leaf(Tensor<T> v, bool needs_grad = true) {
    return push("leaf", {}, std::move(v), nullptr, needs_grad);
  }

  bool needs_grad(int id) const { return needs_[static_cast<size_t>(id)] != 0; }

  const Tensor<T>& val(int id) const { return vals_[static_cast<size_t>(id)]; }

  // Gradient of the last backward() target w.r.t. node `id`; zeros for nodes
  // the loss does not reach.
  const Tensor<T>& grad(int id) {
    ensure_grad(id);
    return grads_[static_cast<size_t>(id)];
  }

  size_t num_nodes() const { return vals_.size(); }

  int add(int a, int b) {
    check_same_shape(val(a), val(b), "tape add");
    Tensor<T> out = stsnet::add(val(a), val(b));
    return push("add", {a, b}, std::move(out), [](Tape& t, const Node& n) {
      const Tensor<T>& g = t.grads_[n.out];
      t.accum(n.in[0], g);
      t.accum(n.in[1], g);
    });
  }

  // Elementwise product of two recorded values.
  int mul(int a, int b) {
    check_same_shape(val(a), val(b), "tape mul");
    Tensor<T> out = hadamard(val(a), val(b));
    return push("mul", {a, b}, std::move(out), [](Tape& t, const Node& n) {
      const Tensor<T>& g = t.grads_[n.out];
      t.accum(n.in[0], hadamard(g, t.val(n.in[1])));
      t.accum(n.in[1], hadamard(g, t.val(n.in[0])));
    });
  }

  int scale(int a, T s) {
    Tensor<T> out = scaled(val(a), s);
    return push("scale", {a}, std::move(out), [s](Tape& t, const Node& n) {
      if (!t.needs_grad(n.in[0])) return;
      t.ensure_grad(n.in[0]);
      axpy_inplace(t.grads_[n.in[0]], s, t.grads_[n.out]);
    });
  }

  // Multiply by a constant tensor (dropout masks, stop-gradient factors).
  int mul_const(int a, Tensor<T> m) {
    check_same_shape(val(a), m, "tape mul_const");
    Tensor<T> out = hadamard(val(a), m);
    return push("mul_const", {a}, std::move(out),
                [m = std::move(m)](Tape& t, const Node& n) {
                  t.accum(n.in[0], hadamard(t.grads_[n.out], m));
                });
  }

  int matmul(int a, int b) {
    Tensor<T> out = stsnet::matmul(val(a), val(b));
    return push("matmul", {a, b}, std::move(out), [](Tape& t, const Node& n) {
      const Tensor<T>& g = t.grads_[n.out];
      if (t.needs_grad(n.in[0])) t.accum(n.in[0], matmul_a_bt(g, t.val(n.in[1])));
      if (t.needs_grad(n.in[1])) t.accum(n.in[1], matmul_at_b(t.val(n.in[0]), g));
    });
  }

  // y = W . flatten(x), W is [out x in].
  int linear(int w, int x) {
    const Tensor<T>& wt = val(w);
    const Tensor<T>& xt = val(x);
    if (wt.ndim() != 2 || wt.dim(1) != xt.size())
      throw dimension_error("linear: weight " + shape_str(wt.shape()) +
                            " vs input " + shape_str(xt.shape()));
    Tensor<T> out = matvec(wt, xt.reshaped({static_cast<int>(xt.size())}));
    return push("linear", {w, x}, std::move(out), [](Tape& t, const Node& n) {
      const Tensor<T>& g = t.grads_[n.out];
      const Tensor<T>& wt = t.val(n.in[0]);
      const Tensor<T>& xt = t.val(n.in[1]);
      const int m = wt.dim(0), k = wt.dim(1);
      const bool nw = t.needs_grad(n.in[0]);
      const bool nx = t.needs_grad(n.in[1]);
      if (nw) t.ensure_grad(n.in[0]);
      if (nx) t.ensure_grad(n.in[1]);
      for (int i = 0; i < m; ++i) {
        const T gi = g[i];
        if (gi == T(0)) continue;
        const T* __restrict wrow = wt.data() + static_cast<int64_t>(i) * k;
        if (nw) {
          T* __restrict gwrow =
              t.grads_[n.in[0]].data() + static_cast<int64_t>(i) * k;
          for (int j = 0; j < k; ++j) gwrow[j] += gi * xt[j];
        }
        if (nx) {
          T* __restrict gx = t.grads_[n.in[1]].data();
          for (int j = 0; j < k; ++j) gx[j] += gi * wrow[j];
        }
      }
    });
  }

  int conv2d(int x, int w, int stride, int pad) {
    Tensor<T> out = stsnet::conv2d(val(x), val(w), stride, pad);
    return push("conv2d", {x, w}, std::move(out),
                [stride, pad](Tape& t, const Node& n) {
                  const bool nx = t.needs_grad(n.in[0]);
                  const bool nw = t.needs_grad(n.in[1]);
                  Tensor<T> gx, gw;
                  conv2d_backward(t.val(n.in[0]), t.val(n.in[1]),
                                  t.grads_[n.out], stride, pad,
                                  nx ? &gx : nullptr, nw ? &gw : nullptr);
                  if (nx) t.accum(n.in[0], gx);
                  if (nw) t.accum(n.in[1], gw);
                });
  }

  int avg_pool(int x, int k) {
    Tensor<T> out = stsnet::avg_pool(val(x), k);
    return push("avg_pool", {x}, std::move(out), [k](Tape& t, const Node& n) {
      t.accum(n.in[0], avg_pool_backward(t.grads_[n.out],
                                         t.val(n.in[0]).shape(), k));
    });
  }

  int global_avg_pool(int x) {
    Tensor<T> out = stsnet::global_avg_pool(val(x));
    return push("global_avg_pool", {x}, std::move(out),
                [](Tape& t, const Node& n) {
                  if (!t.needs_grad(n.in[0])) return;
                  const Tensor<T>& xs = t.val(n.in[0]);
                  const int c = xs.dim(0);
                  const int64_t hw =
                      static_cast<int64_t>(xs.dim(1)) * xs.dim(2);
                  const T inv = T(1) / static_cast<T>(hw);
                  t.ensure_grad(n.in[0]);
                  Tensor<T>& gx = t.grads_[n.in[0]];
                  const Tensor<T>& g = t.grads_[n.out];
                  for (int ci = 0; ci < c; ++ci) {
                    const T gi = g[ci] * inv;
                    T* row = gx.data() + ci * hw;
                    for (int64_t i = 0; i < hw; ++i) row[i] += gi;
                  }
                });
  }

  // Concatenation of flat vectors.
  int concat(int a, int b) {
    const Tensor<T>& at = val(a);
    const Tensor<T>& bt = val(b);
    std::vector<T> data(at.vec());
    data.insert(data.end(), bt.vec().begin(), bt.vec().end());
    const int n = static_cast<int>(data.size());
    Tensor<T> out({n}, std::move(data));
    return push("concat", {a, b}, std::move(out), [](Tape& t, const Node& n) {
      const Tensor<T>& g = t.grads_[n.out];
      const int64_t asize = t.val(n.in[0]).size();
      if (t.needs_grad(n.in[0])) {
        t.ensure_grad(n.in[0]);
        Tensor<T>& ga = t.grads_[n.in[0]];
        for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
      }
      if (t.needs_grad(n.in[1])) {
        t.ensure_grad(n.in[1]);
        Tensor<T>& gb = t.grads_[n.in[1]];
        for (int64_t i = 0; i < gb.size(); ++i) gb[i] += g[asize + i];
      }
    });
  }

  // Membrane update U_t = alpha * (gate .* U_{t-1}) + g_t. `gate` is a
  // constant (stop-gradient); pass an empty tensor when resting is off.
  // u_prev < 0 marks the first step of a window (U_0 = 0).
  int lif_membrane(int g, int u_prev, T alpha, Tensor<T> gate) {
    Tensor<T> out = val(g);
    if (u_prev >= 0) {
      const Tensor<T>& up = val(u_prev);
      check_same_shape(out, up, "lif_membrane");
      if (gate.empty()) {
        for (int64_t i = 0; i < out.size(); ++i) out[i] += alpha * up[i];
      } else {
        for (int64_t i = 0; i < out.size(); ++i)
          out[i] += alpha * (gate[i] * up[i]);
      }
    }
    std::vector<int> in = u_prev >= 0 ? std::vector<int>{g, u_prev}
                                      : std::vector<int>{g};
    return push("lif_membrane", std::move(in), std::move(out),
                [alpha, gate = std::move(gate)](Tape& t, const Node& n) {
                  const Tensor<T>& gr = t.grads_[n.out];
                  t.accum(n.in[0], gr);
                  if (n.in.size() == 2 && t.needs_grad(n.in[1])) {
                    t.ensure_grad(n.in[1]);
                    Tensor<T>& gp = t.grads_[n.in[1]];
                    if (gate.empty()) {
                      for (int64_t i = 0; i < gp.size(); ++i)
                        gp[i] += alpha * gr[i];
                    } else {
                      for (int64_t i = 0; i < gp.size(); ++i)
                        gp[i] += alpha * gate[i] * gr[i];
                    }
                  }
                });
  }

  // Step activation with surrogate backward: O = 1[U >= T],
  // dU += dO .* sg(U).
  int spike(int u, const LifConfig<T>& cfg) {
    const Tensor<T>& ut = val(u);
    Tensor<T> out(ut.shape());
    for (int64_t i = 0; i < ut.size(); ++i)
      out[i] = ut[i] >= cfg.threshold ? T(1) : T(0);
    return push("spike", {u}, std::move(out), [cfg](Tape& t, const Node& n) {
      if (!t.needs_grad(n.in[0])) return;
      const Tensor<T>& g = t.grads_[n.out];
      const Tensor<T>& ut = t.val(n.in[0]);
      const SurrogateEval<T> sg(cfg);
      t.ensure_grad(n.in[0]);
      Tensor<T>& gu = t.grads_[n.in[0]];
      for (int64_t i = 0; i < gu.size(); ++i) gu[i] += g[i] * sg(ut[i]);
    });
  }

  // Shifted leaky-relu (pre-training activation) with exact backward.
  int leaky_shift(int u, const LifConfig<T>& cfg) {
    const Tensor<T>& ut = val(u);
    Tensor<T> out(ut.shape());
    for (int64_t i = 0; i < ut.size(); ++i)
      out[i] = ut[i] >= cfg.threshold ? ut[i] : -cfg.beta * ut[i];
    return push("leaky_shift", {u}, std::move(out),
                [cfg](Tape& t, const Node& n) {
                  if (!t.needs_grad(n.in[0])) return;
                  const Tensor<T>& g = t.grads_[n.out];
                  const Tensor<T>& ut = t.val(n.in[0]);
                  t.ensure_grad(n.in[0]);
                  Tensor<T>& gu = t.grads_[n.in[0]];
                  for (int64_t i = 0; i < gu.size(); ++i)
                    gu[i] += g[i] * (ut[i] >= cfg.threshold ? T(1) : -cfg.beta);
                });
  }

  // Mean over a list of same-shaped values (rate decoding over a window);
  // each input receives grad/n.
  int mean_over(std::vector<int> ids) {
    if (ids.empty()) throw contract_error("mean_over: empty window");
    Tensor<T> out(val(ids[0]).shape());
    for (int id : ids) {
      check_same_shape(out, val(id), "mean_over");
      add_inplace(out, val(id));
    }
    const T inv = T(1) / static_cast<T>(ids.size());
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= inv;
    return push("mean_over", std::move(ids), std::move(out),
                [inv](Tape& t, const Node& n) {
                  const Tensor<T>& g = t.grads_[n.out];
                  for (int id : n.in) {
                    if (!t.needs_grad(id)) continue;
                    t.ensure_grad(id);
                    axpy_inplace(t.grads_[id], inv, g);
                  }
                });
  }

  int sum(int a) {
    Tensor<T> out = Tensor<T>::scalar(stsnet::sum(val(a)));
    return push("sum", {a}, std::move(out), [](Tape& t, const Node& n) {
      if (!t.needs_grad(n.in[0])) return;
      const T g = t.grads_[n.out][0];
      t.ensure_grad(n.in[0]);
      Tensor<T>& ga = t.grads_[n.in[0]];
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }

  // Mean squared error against a constant target.
  int mse(int pred, Tensor<T> target) {
    const Tensor<T>& p = val(pred);
    check_same_shape(p, target, "mse");
    T acc = 0;
    for (int64_t i = 0; i < p.size(); ++i) {
      const T d = p[i] - target[i];
      acc += d * d;
    }
    const T inv = T(1) / static_cast<T>(p.size());
    Tensor<T> out = Tensor<T>::scalar(acc * inv);
    return push("mse", {pred}, std::move(out),
                [target = std::move(target), inv](Tape& t, const Node& n) {
                  if (!t.needs_grad(n.in[0])) return;
                  const T g = t.grads_[n.out][0];
                  const Tensor<T>& p = t.val(n.in[0]);
                  t.ensure_grad(n.in[0]);
                  Tensor<T>& gp = t.grads_[n.in[0]];
                  for (int64_t i = 0; i < gp.size(); ++i)
                    gp[i] += g * T(2) * (p[i] - target[i]) * inv;
                });
  }

  // Binary cross entropy, inputs clamped to [eps, 1-eps].
  int bce(int pred, Tensor<T> target) {
    const Tensor<T>& p = val(pred);
    check_same_shape(p, target, "bce");
    const T eps = static_cast<T>(1e-7);
    T acc = 0;
    for (int64_t i = 0; i < p.size(); ++i) {
      const T r = std::min(std::max(p[i], eps), T(1) - eps);
      acc += -(target[i] * std::log(r) + (T(1) - target[i]) * std::log(T(1) - r));
    }
    const T inv = T(1) / static_cast<T>(p.size());
    Tensor<T> out = Tensor<T>::scalar(acc * inv);
    return push("bce", {pred}, std::move(out),
                [target = std::move(target), inv, eps](Tape& t, const Node& n) {
                  if (!t.needs_grad(n.in[0])) return;
                  const T g = t.grads_[n.out][0];
                  const Tensor<T>& p = t.val(n.in[0]);
                  t.ensure_grad(n.in[0]);
                  Tensor<T>& gp = t.grads_[n.in[0]];
                  for (int64_t i = 0; i < gp.size(); ++i) {
                    const T r = std::min(std::max(p[i], eps), T(1) - eps);
                    gp[i] += g * inv * (r - target[i]) / (r * (T(1) - r));
                  }
                });
  }

  // Reverse accumulation from a scalar loss node. Gradients are summed over
  // all fan-out paths; nodes after `loss_id` are untouched.
  void backward(int loss_id) {
    if (val(loss_id).size() != 1)
      throw contract_error("backward: loss node has shape " +
                           shape_str(val(loss_id).shape()) + ", want scalar");
    grads_.assign(vals_.size(), Tensor<T>());
    grads_[static_cast<size_t>(loss_id)] = Tensor<T>::scalar(T(1));
    for (int id = loss_id; id >= 0; --id) {
      const Node& n = nodes_[static_cast<size_t>(id)];
      if (!n.bwd || !needs_[static_cast<size_t>(id)] ||
          grads_[static_cast<size_t>(id)].empty())
        continue;
      n.bwd(*this, n);
    }
  }

 private:
  struct Node {
    const char* op;
    std::vector<int> in;
    int out;
    std::function<void(Tape&, const Node&)> bwd;
  };

  int push(const char* op, std::vector<int> in, Tensor<T> v,
           std::function<void(Tape&, const Node&)> bwd,
           bool leaf_needs = false) {
    const int id = static_cast<int>(vals_.size());
    bool needs = in.empty() ? leaf_needs : false;
    for (int i : in) needs = needs || needs_[static_cast<size_t>(i)] != 0;
    vals_.push_back(std::move(v));
    nodes_.push_back(Node{op, std::move(in), id, std::move(bwd)});
    needs_.push_back(needs ? 1 : 0);
    return id;
  }

  void ensure_grad(int id) {
    Tensor<T>& g = grads_[static_cast<size_t>(id)];
    if (g.empty()) g = Tensor<T>(val(id).shape());
  }

  void accum(int id, const Tensor<T>& g) {
    if (!needs_[static_cast<size_t>(id)]) return;
    ensure_grad(id);
    add_inplace(grads_[static_cast<size_t>(id)], g);
  }

  std::vector<Tensor<T>> vals_;
  std::vector<Tensor<T>> grads_;
  std::vector<Node> nodes_;
  std::vector<char> needs_;
};

}  // namespace stsnet

#endif  // STSNET_TAPE_HPP_

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

#ifndef STSNET_LIF_HPP_
#define STSNET_LIF_HPP_

#include <cmath>
#include <utility>

#include "stsnet/tensor.hpp"

namespace stsnet {

enum class Surrogate { gaussian, rect };

// LIF neuron configuration shared by a synapse layer.
//
// The membrane recurrence with the resting gate enabled is
//   U_t = alpha * (1 - O_{t-1}) .* U_{t-1} + g_t,   O_t = step(U_t >= T)
// and without it (also the analog pre-training form)
//   U_t = alpha * U_{t-1} + g_t.
//
// `surrogate_width` is the VARIANCE of the Gaussian surrogate (and the full
// width of the rect surrogate). `beta` is the negative slope of the shifted
// leaky-relu used during pre-training.
template <typename T>
struct LifConfig {
  T alpha = T(0.5);
  T threshold = T(0.5);
  bool resting = false;
  T beta = T(0.01);
  Surrogate surrogate = Surrogate::gaussian;
  T surrogate_width = T(1) / T(6);

  void validate() const {
    if (!(alpha >= T(0) && alpha <= T(1)))
      throw parameter_error("lif: alpha must be in [0,1]");
    if (!(threshold > T(0)))
      throw parameter_error("lif: threshold must be > 0");
    if (!(beta >= T(0))) throw parameter_error("lif: beta must be >= 0");
    if (!(surrogate_width > T(0)))
      throw parameter_error("lif: surrogate width must be > 0");
  }
};

// Membrane potentials and previous-step outputs of one synapse layer.
template <typename T>
struct LifLayerState {
  Tensor<T> u;
  Tensor<T> o_prev;

  explicit LifLayerState(const std::vector<int>& shape)
      : u(shape), o_prev(shape) {}
  LifLayerState() = default;
};

// One spiking time step. Updates the state in place and returns the binary
// spike tensor. Fires on U >= T.
template <typename T>
Tensor<T> lif_step(LifLayerState<T>& s, const Tensor<T>& g_out,
                   const LifConfig<T>& cfg) {
  check_same_shape(s.u, g_out, "lif_step");
  Tensor<T> spikes(g_out.shape());
  for (int64_t i = 0; i < g_out.size(); ++i) {
    const T gate = cfg.resting ? (T(1) - s.o_prev[i]) : T(1);
    const T u = cfg.alpha * (gate * s.u[i]) + g_out[i];
    s.u[i] = u;
    spikes[i] = u >= cfg.threshold ? T(1) : T(0);
  }
  s.o_prev = spikes;
  return spikes;
}

// One analog pre-training step: no resting, shifted leaky-relu output.
//   f(U) = U        if U >= T
//        = -beta*U  if U <  T
template <typename T>
Tensor<T> pretrain_step(LifLayerState<T>& s, const Tensor<T>& g_out,
                        const LifConfig<T>& cfg) {
  check_same_shape(s.u, g_out, "pretrain_step");
  Tensor<T> out(g_out.shape());
  for (int64_t i = 0; i < g_out.size(); ++i) {
    const T u = cfg.alpha * s.u[i] + g_out[i];
    s.u[i] = u;
    out[i] = u >= cfg.threshold ? u : -cfg.beta * u;
  }
  s.o_prev = out;
  return out;
}

// Precomputed surrogate evaluator: hoists the Gaussian normalization out of
// the per-element loops.
template <typename T>
struct SurrogateEval {
  Surrogate kind;
  T threshold, half_width, inv_width, norm, neg_inv_2var;

  explicit SurrogateEval(const LifConfig<T>& cfg)
      : kind(cfg.surrogate),
        threshold(cfg.threshold),
        half_width(cfg.surrogate_width / 2),
        inv_width(T(1) / cfg.surrogate_width),
        norm(T(1) / std::sqrt(T(2) * T(3.14159265358979323846) *
                              cfg.surrogate_width)),
        neg_inv_2var(T(-1) / (2 * cfg.surrogate_width)) {}

  T operator()(T u) const {
    const T d = u - threshold;
    if (kind == Surrogate::rect)
      return std::abs(d) <= half_width ? inv_width : T(0);
    return norm * std::exp(d * d * neg_inv_2var);
  }
};

template <typename T>
T surrogate_grad_scalar(T u, const LifConfig<T>& cfg) {
  return SurrogateEval<T>(cfg)(u);
}

// Surrogate derivative of the step activation, evaluated at the membrane
// potentials. Gaussian: pdf of N(threshold, surrogate_width) at U;
// rect: 1/w on |U - T| <= w/2.
template <typename T>
Tensor<T> surrogate_grad(const Tensor<T>& u, const LifConfig<T>& cfg) {
  cfg.validate();
  const SurrogateEval<T> sg(cfg);
  Tensor<T> out(u.shape());
  for (int64_t i = 0; i < u.size(); ++i) out[i] = sg(u[i]);
  return out;
}

// Derivative of the shifted leaky-relu: 1 for U >= T, -beta below.
template <typename T>
Tensor<T> shifted_leaky_relu_grad(const Tensor<T>& u, const LifConfig<T>& cfg) {
  Tensor<T> out(u.shape());
  for (int64_t i = 0; i < u.size(); ++i)
    out[i] = u[i] >= cfg.threshold ? T(1) : -cfg.beta;
  return out;
}

// Forward quantities of time step t needed by the backward recursion:
// the membrane potential U_t and the spike output O_t.
template <typename T>
struct LifStepRecord {
  Tensor<T> u;
  Tensor<T> o;
};

// One step of the BPTT recursion through a spiking synapse.
//
//   dL/dU_t = dL/dO_t .* sg(U_t) + dL/dU_{t+1} * alpha .* (1 - O_t)
//   dL/dg_t = dL/dU_t
//
// The resting gate is treated as a constant (stop-gradient); with resting
// disabled the gate term is just alpha. `dl_du_next` may be empty at the
// last time step.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> lif_backward_step(const Tensor<T>& dl_do_t,
                                                  const Tensor<T>& dl_du_next,
                                                  const LifStepRecord<T>& rec,
                                                  const LifConfig<T>& cfg) {
  if (rec.u.empty() || rec.o.empty())
    throw contract_error("lif_backward_step: missing stored forward state");
  check_same_shape(dl_do_t, rec.u, "lif_backward_step");
  const SurrogateEval<T> sg(cfg);
  Tensor<T> du(rec.u.shape());
  for (int64_t i = 0; i < du.size(); ++i) {
    T v = dl_do_t[i] * sg(rec.u[i]);
    if (!dl_du_next.empty()) {
      const T gate = cfg.resting ? (T(1) - rec.o[i]) : T(1);
      v += dl_du_next[i] * cfg.alpha * gate;
    }
    du[i] = v;
  }
  return {du, du};
}

// Rate decoding over a window: per-neuron mean spike count.
// `spikes` is [T_window x N...]; the result drops the leading time axis.
template <typename T>
Tensor<T> rate_decode(const Tensor<T>& spikes) {
  if (spikes.ndim() < 2 || spikes.dim(0) < 1)
    throw contract_error("rate_decode: window must have length >= 1");
  const int window = spikes.dim(0);
  std::vector<int> shape(spikes.shape().begin() + 1, spikes.shape().end());
  Tensor<T> out(shape);
  const int64_t n = out.size();
  for (int t = 0; t < window; ++t) {
    const T* step = spikes.data() + static_cast<int64_t>(t) * n;
    for (int64_t i = 0; i < n; ++i) out[i] += step[i];
  }
  const T inv = T(1) / static_cast<T>(window);
  for (int64_t i = 0; i < n; ++i) out[i] *= inv;
  return out;
}

template <typename T>
Tensor<T> rate_decode(const std::vector<Tensor<T>>& steps) {
  if (steps.empty())
    throw contract_error("rate_decode: window must have length >= 1");
  Tensor<T> out(steps[0].shape());
  for (const auto& s : steps) add_inplace(out, s);
  const T inv = T(1) / static_cast<T>(steps.size());
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= inv;
  return out;
}

}  // namespace stsnet

#endif  // STSNET_LIF_HPP_

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

#ifndef STSNET_TRAIN_HPP_
#define STSNET_TRAIN_HPP_

#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "stsnet/data.hpp"
#include "stsnet/model.hpp"

namespace stsnet {

enum class OptimizerKind { adam, sgd_momentum };
enum class LossKind { mse, bce };

// Hybrid schedule: epochs 1..pretrain_epochs run the analog phase, the rest
// run spiking BPTT. Optimizer state persists across the switch.
template <typename T>
struct TrainSchedule {
  int pretrain_epochs = 5;
  int total_epochs = 50;
  T lr = static_cast<T>(5e-4);
  OptimizerKind optimizer = OptimizerKind::adam;
  LossKind loss = LossKind::mse;
  int batch_size = 20;
  uint64_t seed = 1;
  LifConfig<T> lif;
  int threads = 1;
  // Optional early stop once the best spiking-phase test accuracy reaches
  // this value (0 disables).
  double stop_at_test_acc = 0.0;

  void validate() const {
    if (pretrain_epochs < 0 || total_epochs < pretrain_epochs)
      throw parameter_error("schedule: need 0 <= pretrain_epochs <= total_epochs");
    if (!(lr > T(0))) throw parameter_error("schedule: lr must be > 0");
    if (batch_size < 1) throw parameter_error("schedule: batch_size must be >= 1");
    lif.validate();
  }
};

// ---------------------------------------------------------------------------
// Losses on rate-decoded outputs (value-level mirrors of the tape ops).

template <typename T>
T loss_mse(const Tensor<T>& rates, const Tensor<T>& target) {
  check_same_shape(rates, target, "loss_mse");
  T acc = 0;
  for (int64_t i = 0; i < rates.size(); ++i) {
    const T d = rates[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<T>(rates.size());
}

template <typename T>
T loss_bce(const Tensor<T>& rates, const Tensor<T>& target) {
  check_same_shape(rates, target, "loss_bce");
  const T eps = static_cast<T>(1e-7);
  T acc = 0;
  for (int64_t i = 0; i < rates.size(); ++i) {
    const T r = std::min(std::max(rates[i], eps), T(1) - eps);
    acc += -(target[i] * std::log(r) + (T(1) - target[i]) * std::log(T(1) - r));
  }
  return acc / static_cast<T>(rates.size());
}

template <typename T>
Tensor<T> one_hot(int label, int num_classes) {
  Tensor<T> t({num_classes});
  t[label] = T(1);
  return t;
}

// ---------------------------------------------------------------------------
// Optimizers.

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  int64_t t = 0;
};

template <typename T>
void adam_step(std::vector<Tensor<T>>& params,
               const std::vector<Tensor<T>>& grads, AdamState<T>& st, T lr,
               T beta1 = T(0.9), T beta2 = T(0.999),
               T eps = static_cast<T>(1e-8)) {
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.shape());
      st.v.emplace_back(p.shape());
    }
  }
  ++st.t;
  const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1),
                                               static_cast<double>(st.t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2),
                                               static_cast<double>(st.t)));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor<T>& w = params[p];
    const Tensor<T>& g = grads[p];
    Tensor<T>& m = st.m[p];
    Tensor<T>& v = st.v[p];
    for (int64_t i = 0; i < w.size(); ++i) {
      m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
      v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
      const T mhat = m[i] / bc1;
      const T vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// v <- mu*v + g; p <- p - lr*v
template <typename T>
void sgd_momentum_step(std::vector<Tensor<T>>& params,
                       const std::vector<Tensor<T>>& grads,
                       std::vector<Tensor<T>>& velocity, T lr, T mu = T(0.9)) {
  if (velocity.empty())
    for (const auto& p : params) velocity.emplace_back(p.shape());
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor<T>& w = params[p];
    const Tensor<T>& g = grads[p];
    Tensor<T>& v = velocity[p];
    for (int64_t i = 0; i < w.size(); ++i) {
      v[i] = mu * v[i] + g[i];
      w[i] -= lr * v[i];
    }
  }
}

// Datasets are float32 on disk and in memory; training may run in double.
template <typename T>
Tensor<T> convert_frames(const Tensor<float>& frames) {
  if constexpr (std::is_same_v<T, float>) {
    return frames;
  } else {
    Tensor<T> out(frames.shape());
    for (int64_t i = 0; i < frames.size(); ++i)
      out[i] = static_cast<T>(frames[i]);
    return out;
  }
}

// ---------------------------------------------------------------------------
// Evaluation: winner-takes-all over window spike counts, dropout off.

struct EvalResult {
  double top1 = 0;
  std::vector<std::vector<int64_t>> confusion;  // [true][predicted]
};

template <typename T>
EvalResult evaluate(const NetworkSpec<T>& net,
                    const std::vector<Tensor<T>>& params, const Dataset& ds,
                    Phase phase, int threads = 1) {
  if (ds.size() == 0) throw contract_error("evaluate: empty dataset");
  const int64_t n = ds.size();
  std::vector<int> pred(static_cast<size_t>(n));
  std::vector<int> truth(static_cast<size_t>(n));
  parallel_for(n, threads, [&](int64_t i) {
    const SequenceSample s = ds.get(i);
    Rng rng(0);
    Tape<T> tape;
    Tensor<T> frames = convert_frames<T>(s.frames);
    WindowRun<T> run =
        forward_window(net, params, frames, phase, Mode::eval, rng, tape);
    pred[static_cast<size_t>(i)] = predict_class(tape.val(run.rates_id));
    truth[static_cast<size_t>(i)] = s.label;
  });
  EvalResult res;
  res.confusion.assign(static_cast<size_t>(ds.num_classes()),
                       std::vector<int64_t>(static_cast<size_t>(ds.num_classes()), 0));
  int64_t correct = 0;
  for (int64_t i = 0; i < n; ++i) {
    res.confusion[static_cast<size_t>(truth[static_cast<size_t>(i)])]
                 [static_cast<size_t>(pred[static_cast<size_t>(i)])]++;
    if (pred[static_cast<size_t>(i)] == truth[static_cast<size_t>(i)]) ++correct;
  }
  res.top1 = static_cast<double>(correct) / static_cast<double>(n);
  return res;
}

// ---------------------------------------------------------------------------
// Training.

struct EpochMetrics {
  int epoch = 0;
  Phase phase = Phase::spiking;
  double train_acc = 0, test_acc = 0, loss = 0;
};

struct Metrics {
  std::vector<EpochMetrics> history;
  std::vector<std::vector<int64_t>> confusion;  // at the best epoch
  std::vector<double> firing_rates;             // final, per weighted layer
  double best_test_acc = 0;
  int best_epoch = -1;
  int64_t optimizer_steps = 0;  // cumulative; never resets at the phase switch
};

template <typename T>
struct TrainResult {
  std::vector<Tensor<T>> best_params;
  std::vector<Tensor<T>> final_params;
  Metrics metrics;
};

namespace detail {

template <typename T>
std::string layer_of_weight(const NetworkSpec<T>& net, size_t slot) {
  for (const auto& l : net.layers)
    if (l.weight_index == static_cast<int>(slot)) return l.name;
  return "weight[" + std::to_string(slot) + "]";
}

}  // namespace detail

// Runs the hybrid loop. Gradients are accumulated per batch with one tape
// per sample (samples fan out across threads, reduction is in sample order,
// so results are independent of the thread count), followed by one serial
// optimizer step. Weights are checkpointed at the best test accuracy.
template <typename T>
TrainResult<T> train(const NetworkSpec<T>& net, std::vector<Tensor<T>> params,
                     const Dataset& train_set, const Dataset& test_set,
                     const TrainSchedule<T>& sched,
                     const std::function<void(const EpochMetrics&)>& on_epoch =
                         nullptr) {
  sched.validate();
  if (train_set.num_classes() != net.num_classes)
    throw contract_error("train: dataset has " +
                         std::to_string(train_set.num_classes()) +
                         " classes, network " + std::to_string(net.num_classes));
  const int64_t n = train_set.size();
  if (n == 0) throw contract_error("train: empty training set");

  TrainResult<T> result;
  AdamState<T> adam;
  std::vector<Tensor<T>> velocity;

  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  for (int epoch = 1; epoch <= sched.total_epochs; ++epoch) {
    const Phase phase =
        epoch <= sched.pretrain_epochs ? Phase::analog : Phase::spiking;

    Rng shuffle_rng(sched.seed, 0xE50000ull + static_cast<uint64_t>(epoch));
    for (int64_t i = n - 1; i > 0; --i) {
      const int64_t j = static_cast<int64_t>(
          shuffle_rng.uniform_int(static_cast<uint64_t>(i + 1)));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    double loss_sum = 0;
    int64_t train_correct = 0;
    for (int64_t start = 0; start < n; start += sched.batch_size) {
      const int64_t bsz = std::min<int64_t>(sched.batch_size, n - start);
      std::vector<std::vector<Tensor<T>>> grads(static_cast<size_t>(bsz));
      std::vector<double> losses(static_cast<size_t>(bsz));
      std::vector<int> preds(static_cast<size_t>(bsz));
      std::vector<int> labels(static_cast<size_t>(bsz));

      parallel_for(bsz, sched.threads, [&](int64_t b) {
        const int64_t idx = order[static_cast<size_t>(start + b)];
        const SequenceSample s = train_set.get(idx);
        Rng drop_rng(sched.seed, 0xD0000000ull +
                                     (static_cast<uint64_t>(epoch) << 32) +
                                     static_cast<uint64_t>(idx));
        Tape<T> tape;
        Tensor<T> frames = convert_frames<T>(s.frames);
        WindowRun<T> run = forward_window(net, params, frames, phase,
                                          Mode::train, drop_rng, tape);
        Tensor<T> target = one_hot<T>(s.label, net.num_classes);
        const int loss_id = sched.loss == LossKind::mse
                                ? tape.mse(run.rates_id, std::move(target))
                                : tape.bce(run.rates_id, std::move(target));
        tape.backward(loss_id);
        losses[static_cast<size_t>(b)] =
            static_cast<double>(tape.val(loss_id)[0]);
        preds[static_cast<size_t>(b)] = predict_class(tape.val(run.rates_id));
        labels[static_cast<size_t>(b)] = s.label;
        auto& g = grads[static_cast<size_t>(b)];
        g.reserve(params.size());
        for (int pid : run.param_ids) g.push_back(tape.grad(pid));
      });

      // Fixed-order reduction, then one optimizer step per batch.
      std::vector<Tensor<T>> gsum;
      gsum.reserve(params.size());
      for (const auto& p : params) gsum.emplace_back(p.shape());
      for (int64_t b = 0; b < bsz; ++b)
        for (size_t p = 0; p < params.size(); ++p)
          add_inplace(gsum[p], grads[static_cast<size_t>(b)][p]);
      const T inv = T(1) / static_cast<T>(bsz);
      for (auto& g : gsum)
        for (int64_t i = 0; i < g.size(); ++i) g[i] *= inv;

      for (int64_t b = 0; b < bsz; ++b) {
        loss_sum += losses[static_cast<size_t>(b)];
        if (preds[static_cast<size_t>(b)] == labels[static_cast<size_t>(b)])
          ++train_correct;
        if (!std::isfinite(losses[static_cast<size_t>(b)]))
          throw contract_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
      }
      for (size_t p = 0; p < gsum.size(); ++p)
        if (!gsum[p].all_finite())
          throw contract_error("training diverged: non-finite gradient at epoch " +
                               std::to_string(epoch) + " in layer " +
                               detail::layer_of_weight(net, p));

      if (sched.optimizer == OptimizerKind::adam)
        adam_step(params, gsum, adam, sched.lr);
      else
        sgd_momentum_step(params, gsum, velocity, sched.lr);
      ++result.metrics.optimizer_steps;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.phase = phase;
    em.loss = loss_sum / static_cast<double>(n);
    em.train_acc = static_cast<double>(train_correct) / static_cast<double>(n);
    EvalResult ev = evaluate(net, params, test_set, phase, sched.threads);
    em.test_acc = ev.top1;
    result.metrics.history.push_back(em);
    if (on_epoch) on_epoch(em);

    if (ev.top1 > result.metrics.best_test_acc ||
        result.metrics.best_epoch < 0) {
      result.metrics.best_test_acc = ev.top1;
      result.metrics.best_epoch = epoch;
      result.metrics.confusion = ev.confusion;
      result.best_params = params;
    }
    if (sched.stop_at_test_acc > 0 && phase == Phase::spiking &&
        result.metrics.best_test_acc >= sched.stop_at_test_acc)
      break;
  }

  result.final_params = std::move(params);
  if (result.best_params.empty()) result.best_params = result.final_params;
  return result;
}

// ---------------------------------------------------------------------------
// CSV emission.

inline void write_metrics_csv(const std::string& path,
                              const std::vector<EpochMetrics>& history) {
  std::ofstream os(path);
  if (!os) throw path_error("cannot write " + path);
  os << "epoch,phase,train_acc,test_acc,loss\n";
  for (const auto& m : history)
    os << m.epoch << ',' << phase_name(m.phase) << ',' << m.train_acc << ','
       << m.test_acc << ',' << m.loss << '\n';
}

inline void write_confusion_csv(const std::string& path,
                                const std::vector<std::vector<int64_t>>& c) {
  std::ofstream os(path);
  if (!os) throw path_error("cannot write " + path);
  for (const auto& row : c) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) os << ',';
      os << row[j];
    }
    os << '\n';
  }
}

inline void write_rates_csv(const std::string& path,
                            const std::vector<std::string>& names,
                            const std::vector<double>& rates) {
  std::ofstream os(path);
  if (!os) throw path_error("cannot write " + path);
  os << "layer,rate\n";
  for (size_t i = 0; i < names.size(); ++i)
    os << names[i] << ',' << rates[i] << '\n';
}

}  // namespace stsnet

#endif  // STSNET_TRAIN_HPP_

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

#ifndef STSNET_MODEL_HPP_
#define STSNET_MODEL_HPP_

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "stsnet/tape.hpp"

namespace stsnet {

enum class LayerKind { input_synapse, conv, linear, avg_pool, dropout, synapse };
enum class Merge { none, add, concat };
enum class Phase { analog, spiking };
enum class Mode { train, eval };

inline const char* phase_name(Phase p) {
  return p == Phase::analog ? "analog" : "spiking";
}

template <typename T>
struct LayerNode {
  LayerKind kind;
  std::string name;
  std::vector<int> inputs;  // producer layer indices; -1 = network input
  Merge merge = Merge::none;

  int out_ch = 0, kernel = 0, stride = 1, pad = 0;  // conv
  int units = 0;                                    // linear
  int pool_k = 0;                                   // avg_pool
  T drop_rate = T(0);                               // dropout
  LifConfig<T> lif;                                 // synapse kinds

  // Resolved at build time.
  std::vector<int> out_shape;
  int weight_index = -1;       // slot in the parameter vector, -1 if none
  bool counts_as_layer = false;  // toward the weighted-layer count

  bool stateful() const {
    return kind == LayerKind::synapse || kind == LayerKind::input_synapse;
  }
  bool weighted() const {
    return kind == LayerKind::conv || kind == LayerKind::linear;
  }
};

// Directed acyclic layer graph. Layers are stored in topological order
// (every input index precedes its consumer), with merges expressed as
// multi-input nodes.
template <typename T>
struct NetworkSpec {
  std::string arch;
  std::vector<LayerNode<T>> layers;
  std::vector<int> input_shape;  // C, H, W
  int num_classes = 0;
  int window = 10;

  int output_layer() const { return static_cast<int>(layers.size()) - 1; }

  std::vector<int> weighted_layers() const {
    std::vector<int> ids;
    for (size_t i = 0; i < layers.size(); ++i)
      if (layers[i].weighted()) ids.push_back(static_cast<int>(i));
    return ids;
  }

  // The architecture's advertised depth: convs and FCs on the main path.
  int weighted_layer_count() const {
    int n = 0;
    for (const auto& l : layers)
      if (l.weighted() && l.counts_as_layer) ++n;
    return n;
  }

  // Filled by the builder helpers below.
  struct WeightInfo {
    std::vector<int> shape;
    int64_t fan_in = 0;
  };
  std::vector<WeightInfo> weights;
};

namespace detail {

template <typename T>
int64_t flat_size(const std::vector<int>& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

template <typename T>
int append_layer(NetworkSpec<T>& net, LayerNode<T> l) {
  const std::vector<int>* in0 = nullptr;
  if (!l.inputs.empty())
    in0 = l.inputs[0] < 0
              ? &net.input_shape
              : &net.layers[static_cast<size_t>(l.inputs[0])].out_shape;

  switch (l.kind) {
    case LayerKind::input_synapse:
      l.out_shape = net.input_shape;
      break;
    case LayerKind::conv: {
      if ((*in0).size() != 3)
        throw dimension_error(l.name + ": conv input " + shape_str(*in0));
      const int c = (*in0)[0], h = (*in0)[1], w = (*in0)[2];
      const int num_h = h + 2 * l.pad - l.kernel;
      const int num_w = w + 2 * l.pad - l.kernel;
      if (num_h < 0 || num_w < 0 || num_h % l.stride || num_w % l.stride)
        throw dimension_error(l.name + ": non-integral conv output for input " +
                              shape_str(*in0));
      l.out_shape = {l.out_ch, num_h / l.stride + 1, num_w / l.stride + 1};
      l.weight_index = static_cast<int>(net.weights.size());
      net.weights.push_back({{l.out_ch, c, l.kernel, l.kernel},
                             static_cast<int64_t>(c) * l.kernel * l.kernel});
      break;
    }
    case LayerKind::linear: {
      int64_t fan = 0;
      for (size_t s = 0; s < l.inputs.size(); ++s) {
        const int src = l.inputs[s];
        fan += flat_size<T>(src < 0
                                ? net.input_shape
                                : net.layers[static_cast<size_t>(src)].out_shape);
      }
      l.out_shape = {l.units};
      l.weight_index = static_cast<int>(net.weights.size());
      net.weights.push_back({{l.units, static_cast<int>(fan)}, fan});
      break;
    }
    case LayerKind::avg_pool: {
      const int c = (*in0)[0], h = (*in0)[1], w = (*in0)[2];
      if (l.pool_k < 1 || h % l.pool_k || w % l.pool_k)
        throw dimension_error(l.name + ": pool k=" + std::to_string(l.pool_k) +
                              " does not divide " + shape_str(*in0));
      l.out_shape = {c, h / l.pool_k, w / l.pool_k};
      break;
    }
    case LayerKind::dropout:
      l.out_shape = *in0;
      break;
    case LayerKind::synapse: {
      l.out_shape = *in0;
      if (l.inputs.size() > 1) {
        if (l.merge != Merge::add)
          throw contract_error(l.name + ": synapse merge must be add");
        for (size_t s = 1; s < l.inputs.size(); ++s) {
          const auto& other =
              net.layers[static_cast<size_t>(l.inputs[s])].out_shape;
          if (other != l.out_shape)
            throw dimension_error(l.name + ": add merge of " +
                                  shape_str(l.out_shape) + " and " +
                                  shape_str(other));
        }
      }
      break;
    }
  }
  net.layers.push_back(std::move(l));
  return static_cast<int>(net.layers.size()) - 1;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Architecture builders.

// Shallow two-conv spiking network:
//   input synapse -> conv3x3(c1) -> synapse -> pool2
//                 -> conv3x3(c2) -> synapse -> pool2 -> FC -> synapse.
template <typename T>
NetworkSpec<T> build_convsnn(int c1, int c2, const std::vector<int>& input_shape,
                             int num_classes, const LifConfig<T>& lif,
                             int window = 10) {
  if (c1 < 1 || c2 < 1) throw parameter_error("convsnn: channels must be positive");
  if (input_shape.size() != 3)
    throw dimension_error("convsnn: input shape " + shape_str(input_shape));
  if (input_shape[1] % 4 != 0 || input_shape[2] % 4 != 0 ||
      input_shape[1] < 4 || input_shape[2] < 4)
    throw dimension_error("convsnn: input " + shape_str(input_shape) +
                          " too small for two 2x pools");
  lif.validate();
  NetworkSpec<T> net;
  net.arch = "convsnn";
  net.input_shape = input_shape;
  net.num_classes = num_classes;
  net.window = window;

  using detail::append_layer;
  LayerNode<T> l;
  auto node = [&](LayerKind k, std::string name, std::vector<int> in) {
    LayerNode<T> n;
    n.kind = k;
    n.name = std::move(name);
    n.inputs = std::move(in);
    n.lif = lif;
    return n;
  };

  int id = -1;
  l = node(LayerKind::input_synapse, "in_syn", {-1});
  id = append_layer(net, l);
  l = node(LayerKind::conv, "conv1", {id});
  l.out_ch = c1, l.kernel = 3, l.stride = 1, l.pad = 1, l.counts_as_layer = true;
  id = append_layer(net, l);
  id = append_layer(net, node(LayerKind::synapse, "syn1", {id}));
  l = node(LayerKind::avg_pool, "pool1", {id});
  l.pool_k = 2;
  id = append_layer(net, l);
  l = node(LayerKind::conv, "conv2", {id});
  l.out_ch = c2, l.kernel = 3, l.stride = 1, l.pad = 1, l.counts_as_layer = true;
  id = append_layer(net, l);
  id = append_layer(net, node(LayerKind::synapse, "syn2", {id}));
  l = node(LayerKind::avg_pool, "pool2", {id});
  l.pool_k = 2;
  id = append_layer(net, l);
  l = node(LayerKind::linear, "fc", {id});
  l.units = num_classes, l.counts_as_layer = true;
  id = append_layer(net, l);
  append_layer(net, node(LayerKind::synapse, "out_syn", {id}));
  return net;
}

// 18 weighted layers: one stem conv, four blocks of two residual sub-blocks
// (two 3x3 convs each), and the classifier FC. Sub-block merges happen on
// pre-synapse values and the merged sum is re-binarized by the sub-block's
// synapse. Blocks 2-4 downsample by an avg-pool fused in front of the first
// conv (and in front of the 1x1 conv + synapse on the skip path). Blocks 3
// and 4 are globally pooled and concatenated into the classifier input; the
// 1x1 skip convs carry weights but do not count toward the depth.
template <typename T>
NetworkSpec<T> build_sts_resnet(double width_scale,
                                const std::vector<int>& input_shape,
                                int num_classes, const LifConfig<T>& lif,
                                int window = 10, T drop_rate = T(0.25)) {
  if (!(width_scale > 0)) throw parameter_error("sts-resnet: width_scale must be > 0");
  if (input_shape.size() != 3)
    throw dimension_error("sts-resnet: input shape " + shape_str(input_shape));
  const int h = input_shape[1], w = input_shape[2];
  if (h % 8 != 0 || w % 8 != 0 || h < 8 || w < 8 || h != w)
    throw dimension_error("sts-resnet: input " + shape_str(input_shape) +
                          " too small for three 2x downsamples");
  lif.validate();
  NetworkSpec<T> net;
  net.arch = "sts-resnet";
  net.input_shape = input_shape;
  net.num_classes = num_classes;
  net.window = window;

  using detail::append_layer;
  auto node = [&](LayerKind k, std::string name, std::vector<int> in) {
    LayerNode<T> n;
    n.kind = k;
    n.name = std::move(name);
    n.inputs = std::move(in);
    n.lif = lif;
    return n;
  };
  auto conv = [&](std::string name, int in_id, int ch, int kernel, int pad,
                  bool counted) {
    LayerNode<T> n = node(LayerKind::conv, std::move(name), {in_id});
    n.out_ch = ch, n.kernel = kernel, n.stride = 1, n.pad = pad;
    n.counts_as_layer = counted;
    return append_layer(net, n);
  };
  auto pool = [&](std::string name, int in_id, int k) {
    LayerNode<T> n = node(LayerKind::avg_pool, std::move(name), {in_id});
    n.pool_k = k;
    return append_layer(net, n);
  };

  const int base[4] = {64, 128, 256, 512};
  int widths[4];
  for (int b = 0; b < 4; ++b)
    widths[b] = std::max(1, static_cast<int>(std::lround(base[b] * width_scale)));

  int id = append_layer(net, node(LayerKind::input_synapse, "in_syn", {-1}));
  id = conv("conv0", id, widths[0], 3, 1, true);
  id = append_layer(net, node(LayerKind::synapse, "syn0", {id}));

  int block_out[4] = {-1, -1, -1, -1};
  for (int b = 0; b < 4; ++b) {
    for (int s = 0; s < 2; ++s) {
      const std::string tag = "b" + std::to_string(b + 1) + "s" + std::to_string(s + 1);
      const bool down = b > 0 && s == 0;
      const int block_in = id;
      int main_in = block_in;
      if (down) main_in = pool(tag + ".pool", block_in, 2);
      int m = conv(tag + ".conv1", main_in, widths[b], 3, 1, true);
      m = append_layer(net, node(LayerKind::synapse, tag + ".syn1", {m}));
      {
        LayerNode<T> n = node(LayerKind::dropout, tag + ".drop", {m});
        n.drop_rate = drop_rate;
        m = append_layer(net, n);
      }
      m = conv(tag + ".conv2", m, widths[b], 3, 1, true);
      int skip = block_in;
      const bool reshape = down || net.layers[static_cast<size_t>(block_in)]
                                           .out_shape[0] != widths[b];
      if (reshape) {
        int sk = down ? main_in : block_in;  // share the downsampling pool
        sk = conv(tag + ".skip_conv", sk, widths[b], 1, 0, false);
        sk = append_layer(net, node(LayerKind::synapse, tag + ".skip_syn", {sk}));
        skip = sk;
      }
      LayerNode<T> merge = node(LayerKind::synapse, tag + ".syn2", {m, skip});
      merge.merge = Merge::add;
      id = append_layer(net, merge);
    }
    block_out[b] = id;
  }

  const auto& s3 = net.layers[static_cast<size_t>(block_out[2])].out_shape;
  const auto& s4 = net.layers[static_cast<size_t>(block_out[3])].out_shape;
  int gap3 = pool("gap3", block_out[2], s3[1]);
  int gap4 = pool("gap4", block_out[3], s4[1]);

  LayerNode<T> fc = node(LayerKind::linear, "fc", {gap3, gap4});
  fc.units = num_classes;
  fc.merge = Merge::concat;
  fc.counts_as_layer = true;
  id = append_layer(net, fc);
  append_layer(net, node(LayerKind::synapse, "out_syn", {id}));
  return net;
}

// He-uniform initialization over the graph-ordered weight slots.
template <typename T>
std::vector<Tensor<T>> init_params(const NetworkSpec<T>& net, Rng& rng) {
  std::vector<Tensor<T>> params;
  params.reserve(net.weights.size());
  for (const auto& wi : net.weights) {
    Tensor<T> w(wi.shape);
    const double limit = std::sqrt(6.0 / static_cast<double>(wi.fan_in));
    for (int64_t i = 0; i < w.size(); ++i)
      w[i] = static_cast<T>(rng.uniform(-limit, limit));
    params.push_back(std::move(w));
  }
  return params;
}

// ---------------------------------------------------------------------------
// Windowed forward execution.

template <typename T>
struct WindowRun {
  std::vector<int> param_ids;                 // tape leaves, weight-slot order
  std::vector<int> step_outputs;              // output-synapse value per step
  std::vector<std::vector<int>> layer_values; // [layer][step] value ids
  std::vector<std::vector<int>> layer_membranes;  // U ids, synapse layers only
  int rates_id = -1;                          // rate-decoded class outputs
};

// Runs the graph over a full time window on one tape. LIF states start at
// zero; the dropout mask is drawn once per window in train mode and is the
// identity in eval mode. `analog_output` switches the output synapse to the
// analog activation as well (used by smooth-path gradient checks only).
template <typename T>
WindowRun<T> forward_window(const NetworkSpec<T>& net,
                            const std::vector<Tensor<T>>& params,
                            const Tensor<T>& frames, Phase phase, Mode mode,
                            Rng& rng, Tape<T>& tape,
                            bool analog_output = false) {
  const size_t n_layers = net.layers.size();
  if (params.size() != net.weights.size())
    throw contract_error("forward_window: got " + std::to_string(params.size()) +
                         " parameter tensors, network has " +
                         std::to_string(net.weights.size()));
  std::vector<int> want = {net.window, net.input_shape[0], net.input_shape[1],
                           net.input_shape[2]};
  if (frames.shape() != want)
    throw dimension_error("forward_window: frames " + shape_str(frames.shape()) +
                          ", network expects " + shape_str(want));

  WindowRun<T> run;
  run.layer_values.assign(n_layers, {});
  run.layer_membranes.assign(n_layers, {});
  for (const auto& p : params) run.param_ids.push_back(tape.leaf(p));

  // Per-window dropout masks.
  std::vector<Tensor<T>> masks(n_layers);
  for (size_t l = 0; l < n_layers; ++l)
    if (net.layers[l].kind == LayerKind::dropout && mode == Mode::train &&
        net.layers[l].drop_rate > T(0))
      masks[l] = dropout_mask<T>(net.layers[l].out_shape,
                                 static_cast<double>(net.layers[l].drop_rate),
                                 rng);

  std::vector<int> u_prev(n_layers, -1);
  std::vector<Tensor<T>> o_prev(n_layers);
  const int64_t frame_n = frames.size() / net.window;

  for (int t = 0; t < net.window; ++t) {
    std::vector<T> fdata(frames.data() + t * frame_n,
                         frames.data() + (t + 1) * frame_n);
    const int frame_id =
        tape.leaf(Tensor<T>(net.input_shape, std::move(fdata)), false);

    std::vector<int> out_id(n_layers, -1);
    for (size_t l = 0; l < n_layers; ++l) {
      const LayerNode<T>& ln = net.layers[l];
      auto in_id = [&](size_t slot) {
        const int src = ln.inputs[slot];
        return src < 0 ? frame_id : out_id[static_cast<size_t>(src)];
      };
      switch (ln.kind) {
        case LayerKind::conv:
          out_id[l] = tape.conv2d(in_id(0), run.param_ids[ln.weight_index],
                                  ln.stride, ln.pad);
          break;
        case LayerKind::linear: {
          int x = in_id(0);
          for (size_t s = 1; s < ln.inputs.size(); ++s)
            x = tape.concat(x, in_id(s));
          out_id[l] = tape.linear(run.param_ids[ln.weight_index], x);
          break;
        }
        case LayerKind::avg_pool:
          out_id[l] = tape.avg_pool(in_id(0), ln.pool_k);
          break;
        case LayerKind::dropout:
          out_id[l] = masks[l].empty() ? in_id(0)
                                       : tape.mul_const(in_id(0), masks[l]);
          break;
        case LayerKind::input_synapse:
        case LayerKind::synapse: {
          int g = in_id(0);
          for (size_t s = 1; s < ln.inputs.size(); ++s)
            g = tape.add(g, in_id(s));
          const bool spiking = phase == Phase::spiking;
          Tensor<T> gate;
          if (spiking && ln.lif.resting && u_prev[l] >= 0) {
            gate = Tensor<T>(ln.out_shape);
            for (int64_t i = 0; i < gate.size(); ++i)
              gate[i] = T(1) - o_prev[l][i];
          }
          const int u = tape.lif_membrane(g, u_prev[l], ln.lif.alpha,
                                          std::move(gate));
          u_prev[l] = u;
          run.layer_membranes[l].push_back(u);
          const bool is_out = static_cast<int>(l) == net.output_layer();
          const bool step_act = spiking || (is_out && !analog_output);
          out_id[l] = step_act ? tape.spike(u, ln.lif)
                               : tape.leaky_shift(u, ln.lif);
          if (spiking && ln.lif.resting) o_prev[l] = tape.val(out_id[l]);
          break;
        }
      }
      run.layer_values[l].push_back(out_id[l]);
    }
    run.step_outputs.push_back(out_id[n_layers - 1]);
  }
  run.rates_id = tape.mean_over(run.step_outputs);
  return run;
}

// Winner-takes-all over rate-decoded outputs; ties go to the lowest index.
template <typename T>
int predict_class(const Tensor<T>& rates) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(rates.size()); ++i)
    if (rates[i] > rates[best]) best = i;
  return best;
}

// ---------------------------------------------------------------------------
// Operation counting (dense multiply-accumulates vs spike-driven
// accumulates). MAC counts are per window; the spike estimate scales each
// layer's MACs by the measured mean presynaptic firing rate.

struct LayerOps {
  std::string name;
  double macs = 0;   // per window
  double rate = 0;   // mean presynaptic activity
  double accs = 0;   // macs * rate
};

struct OpsReport {
  std::vector<LayerOps> layers;
  double dense_macs = 0;
  double spike_accs = 0;
};

template <typename T>
OpsReport count_ops(const NetworkSpec<T>& net,
                    const std::vector<double>& rates = {}) {
  const auto weighted = net.weighted_layers();
  if (!rates.empty() && rates.size() != weighted.size())
    throw contract_error("count_ops: got " + std::to_string(rates.size()) +
                         " rates for " + std::to_string(weighted.size()) +
                         " weighted layers");
  OpsReport rep;
  for (size_t i = 0; i < weighted.size(); ++i) {
    const LayerNode<T>& l = net.layers[static_cast<size_t>(weighted[i])];
    LayerOps ops;
    ops.name = l.name;
    double per_step = 0;
    if (l.kind == LayerKind::conv) {
      const auto& ws = net.weights[static_cast<size_t>(l.weight_index)].shape;
      per_step = static_cast<double>(ws[1]) * ws[2] * ws[3] * l.out_ch *
                 l.out_shape[1] * l.out_shape[2];
    } else {
      const auto& ws = net.weights[static_cast<size_t>(l.weight_index)].shape;
      per_step = static_cast<double>(ws[0]) * ws[1];
    }
    ops.macs = per_step * net.window;
    ops.rate = rates.empty() ? 0.0 : rates[i];
    ops.accs = ops.macs * ops.rate;
    rep.dense_macs += ops.macs;
    rep.spike_accs += ops.accs;
    rep.layers.push_back(std::move(ops));
  }
  return rep;
}

// Mean activity of each weighted layer's input over steps, elements, and
// samples, in spiking eval mode. These are the measured rates for count_ops.
template <typename T>
std::vector<double> measure_firing_rates(const NetworkSpec<T>& net,
                                         const std::vector<Tensor<T>>& params,
                                         const std::vector<Tensor<T>>& sample_frames) {
  const auto weighted = net.weighted_layers();
  std::vector<double> sums(weighted.size(), 0.0);
  std::vector<int64_t> counts(weighted.size(), 0);
  Rng rng(0);
  for (const auto& frames : sample_frames) {
    Tape<T> tape;
    WindowRun<T> run = forward_window(net, params, frames, Phase::spiking,
                                      Mode::eval, rng, tape);
    for (size_t i = 0; i < weighted.size(); ++i) {
      const LayerNode<T>& l = net.layers[static_cast<size_t>(weighted[i])];
      for (int t = 0; t < net.window; ++t) {
        for (size_t s = 0; s < l.inputs.size(); ++s) {
          const int src = l.inputs[s];
          if (src < 0) continue;
          const Tensor<T>& v =
              tape.val(run.layer_values[static_cast<size_t>(src)][t]);
          for (int64_t j = 0; j < v.size(); ++j)
            sums[i] += static_cast<double>(v[j]);
          counts[i] += v.size();
        }
      }
    }
  }
  std::vector<double> rates(weighted.size(), 0.0);
  for (size_t i = 0; i < weighted.size(); ++i)
    if (counts[i] > 0) rates[i] = sums[i] / static_cast<double>(counts[i]);
  return rates;
}

// ---------------------------------------------------------------------------
// Feature-map dumps: one file per time step with the chosen synapse layer's
// outputs tiled channel-by-channel into a grid.

enum class DumpFormat { pgm, csv };

template <typename T>
std::vector<std::string> dump_feature_maps(const NetworkSpec<T>& net,
                                           const std::vector<Tensor<T>>& params,
                                           const Tensor<T>& frames,
                                           int layer_index,
                                           const std::string& dir,
                                           DumpFormat format = DumpFormat::pgm,
                                           Phase phase = Phase::spiking) {
  if (layer_index < 0 || layer_index >= static_cast<int>(net.layers.size()) ||
      !net.layers[static_cast<size_t>(layer_index)].stateful())
    throw parameter_error("dump_feature_maps: layer " +
                          std::to_string(layer_index) +
                          " is not a synapse layer");
  Rng rng(0);
  Tape<T> tape;
  WindowRun<T> run =
      forward_window(net, params, frames, phase, Mode::eval, rng, tape);

  std::vector<std::string> files;
  for (int t = 0; t < net.window; ++t) {
    const Tensor<T>& v =
        tape.val(run.layer_values[static_cast<size_t>(layer_index)][t]);
    int c = 1, h = 1, w = static_cast<int>(v.size());
    if (v.ndim() == 3) c = v.dim(0), h = v.dim(1), w = v.dim(2);
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(c))));
    const int gh = grid * h, gw = ((c + grid - 1) / grid) * w;
    std::vector<T> img(static_cast<size_t>(gh) * gw, T(0));
    for (int ci = 0; ci < c; ++ci) {
      const int gy = (ci % grid) * h, gx = (ci / grid) * w;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          img[static_cast<size_t>(gy + y) * gw + gx + x] =
              v[(static_cast<int64_t>(ci) * h + y) * w + x];
    }
    char name[32];
    std::snprintf(name, sizeof(name), "step_%02d.%s", t,
                  format == DumpFormat::pgm ? "pgm" : "csv");
    const std::string path = dir + "/" + name;
    std::ofstream os(path);
    if (!os) throw path_error("cannot write " + path);
    if (format == DumpFormat::pgm) {
      os << "P2\n" << gw << " " << gh << "\n1\n";
      for (int y = 0; y < gh; ++y) {
        for (int x = 0; x < gw; ++x) {
          if (x) os << ' ';
          os << (img[static_cast<size_t>(y) * gw + x] >= T(0.5) ? 1 : 0);
        }
        os << '\n';
      }
    } else {
      for (int y = 0; y < gh; ++y) {
        for (int x = 0; x < gw; ++x) {
          if (x) os << ',';
          os << img[static_cast<size_t>(y) * gw + x];
        }
        os << '\n';
      }
    }
    files.push_back(path);
  }
  return files;
}

// ---------------------------------------------------------------------------
// Checkpoints: "SNNW1" magic, tensor count, all shapes, then the flat
// float32 little-endian arrays in graph order.

template <typename T>
void save_checkpoint(const std::string& path,
                     const std::vector<Tensor<T>>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw path_error("cannot write checkpoint " + path);
  os.write("SNNW1", 5);
  write_u32_le(os, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    write_u32_le(os, static_cast<uint32_t>(p.ndim()));
    for (int d : p.shape()) write_u32_le(os, static_cast<uint32_t>(d));
  }
  for (const auto& p : params)
    for (int64_t i = 0; i < p.size(); ++i)
      write_f32_le(os, static_cast<float>(p[i]));
  if (!os) throw path_error("short write on checkpoint " + path);
}

template <typename T>
std::vector<Tensor<T>> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw path_error("cannot open checkpoint " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::string(magic, 5) != "SNNW1")
    throw format_error(path + ": bad checkpoint magic");
  const uint32_t n = read_u32_le(is);
  std::vector<std::vector<int>> shapes(n);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t nd = read_u32_le(is);
    if (!is || nd > 8) throw format_error(path + ": bad tensor rank");
    shapes[i].resize(nd);
    for (uint32_t d = 0; d < nd; ++d)
      shapes[i][d] = static_cast<int>(read_u32_le(is));
  }
  std::vector<Tensor<T>> params;
  params.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    Tensor<T> p(shapes[i]);
    for (int64_t j = 0; j < p.size(); ++j)
      p[j] = static_cast<T>(read_f32_le(is));
    if (!is) throw format_error(path + ": truncated checkpoint");
    params.push_back(std::move(p));
  }
  return params;
}

// Shape check against a built network; mismatches name both sides.
template <typename T>
void check_checkpoint_shapes(const NetworkSpec<T>& net,
                             const std::vector<Tensor<T>>& params) {
  if (params.size() != net.weights.size())
    throw format_error("checkpoint has " + std::to_string(params.size()) +
                       " tensors, network " + net.arch + " expects " +
                       std::to_string(net.weights.size()));
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].shape() != net.weights[i].shape)
      throw format_error("checkpoint tensor " + std::to_string(i) +
                         " has shape " + shape_str(params[i].shape()) +
                         ", network expects " + shape_str(net.weights[i].shape));
}

}  // namespace stsnet

#endif  // STSNET_MODEL_HPP_

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "gradcheck_util.hpp"
#include "oracles.hpp"
#include "stsnet/train.hpp"
#include "testutil.hpp"

using namespace stsnet;
using testutil::TempDir;
using testutil::random_tensor;

namespace {

template <typename T>
LifConfig<T> base_cfg() {
  LifConfig<T> cfg;
  cfg.alpha = T(0.5);
  cfg.threshold = T(0.5);
  cfg.resting = false;
  return cfg;
}

// One-sample dataset around a fixed frame tensor.
MaterializedDataset single_sample_set(const Tensor<float>& frames, int label,
                                      int classes) {
  SequenceSample s;
  s.frames = frames;
  s.label = label;
  return MaterializedDataset({s}, classes, frames.dim(0));
}

MaterializedDataset balanced_set(int per_class, int classes, int window, int hw,
                                 uint64_t seed) {
  Rng rng(seed);
  std::vector<SequenceSample> samples;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      SequenceSample s;
      s.frames = random_tensor<float>({window, 1, hw, hw}, rng, 0.0, 1.0);
      s.label = c;
      samples.push_back(std::move(s));
    }
  return MaterializedDataset(std::move(samples), classes, window);
}

}  // namespace

TEST_CASE("loss_mse examples") {
  Tensor<double> r1({2}, {1, 0}), t1({2}, {1, 0});
  CHECK(loss_mse(r1, t1) == 0.0);
  Tensor<double> r2({2}, {0, 0});
  CHECK(loss_mse(r2, t1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(loss_mse(r1, Tensor<double>({3})), dimension_error);
}

TEST_CASE("loss_bce examples and symmetry") {
  const double eps = 1e-7;
  Tensor<double> r({2}, {1 - eps, eps}), t({2}, {1, 0});
  CHECK(loss_bce(r, t) == doctest::Approx(eps).epsilon(0.01));
  Tensor<double> half({2}, {0.5, 0.5});
  CHECK(loss_bce(half, t) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  for (double p : {0.2, 0.5, 0.9}) {
    Tensor<double> a({1}, {p}), b({1}, {1 - p});
    Tensor<double> y1({1}, {1.0}), y0({1}, {0.0});
    CHECK(loss_bce(a, y1) == doctest::Approx(loss_bce(b, y0)).epsilon(1e-12));
  }
}

TEST_CASE("adam first-step behaviour") {
  std::vector<Tensor<double>> p = {Tensor<double>({1}, {1.0})};
  std::vector<Tensor<double>> g = {Tensor<double>({1}, {1.0})};
  AdamState<double> st;
  adam_step(p, g, st, 1e-3);
  CHECK(p[0][0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));

  // zero gradient moves nothing
  std::vector<Tensor<double>> pz = {Tensor<double>({3}, {1, 2, 3})};
  std::vector<Tensor<double>> gz = {Tensor<double>({3})};
  AdamState<double> st2;
  for (int i = 0; i < 5; ++i) adam_step(pz, gz, st2, 1e-3);
  CHECK(pz[0][0] == 1.0);
  CHECK(pz[0][2] == 3.0);

  // first-step scale invariance: g and 100 g give the same update
  std::vector<Tensor<double>> pa = {Tensor<double>({1}, {0.0})};
  std::vector<Tensor<double>> pb = {Tensor<double>({1}, {0.0})};
  std::vector<Tensor<double>> ga = {Tensor<double>({1}, {0.01})};
  std::vector<Tensor<double>> gb = {Tensor<double>({1}, {1.0})};
  AdamState<double> sa, sb;
  adam_step(pa, ga, sa, 1e-3);
  adam_step(pb, gb, sb, 1e-3);
  CHECK(pa[0][0] == doctest::Approx(pb[0][0]).epsilon(1e-5));
}

TEST_CASE("sgd momentum") {
  std::vector<Tensor<double>> p = {Tensor<double>({1}, {0.0})};
  std::vector<Tensor<double>> g = {Tensor<double>({1}, {1.0})};
  std::vector<Tensor<double>> v;
  sgd_momentum_step(p, g, v, 0.1);
  CHECK(p[0][0] == doctest::Approx(-0.1).epsilon(1e-14));

  // constant gradient: velocity approaches g/(1-mu) geometrically
  for (int i = 0; i < 200; ++i) sgd_momentum_step(p, g, v, 0.1);
  CHECK(v[0][0] == doctest::Approx(1.0 / (1.0 - 0.9)).epsilon(1e-6));

  std::vector<Tensor<double>> p0 = {Tensor<double>({1}, {5.0})};
  std::vector<Tensor<double>> g0 = {Tensor<double>({1}, {0.0})};
  std::vector<Tensor<double>> v0;
  sgd_momentum_step(p0, g0, v0, 0.1);
  CHECK(p0[0][0] == 5.0);
}

TEST_CASE("winner-takes-all ties go to the lowest class index") {
  Tensor<double> rates({3}, {0.3, 0.7, 0.7});
  CHECK(predict_class(rates) == 1);
  Tensor<double> flat({4}, {0.0, 0.0, 0.0, 0.0});
  CHECK(predict_class(flat) == 0);
}

TEST_CASE("silent network on a balanced set predicts class 0 at chance") {
  auto net = build_convsnn<float>(2, 2, {1, 8, 8}, 10, base_cfg<float>());
  std::vector<Tensor<float>> zeros;
  for (const auto& w : net.weights) zeros.emplace_back(w.shape);
  MaterializedDataset ds = balanced_set(3, 10, 10, 8, 77);
  EvalResult ev = evaluate(net, zeros, ds, Phase::spiking, 2);
  CHECK(ev.top1 == doctest::Approx(0.1));
  for (int c = 0; c < 10; ++c) {
    CHECK(ev.confusion[static_cast<size_t>(c)][0] == 3);  // everything -> class 0
    for (int q = 1; q < 10; ++q)
      CHECK(ev.confusion[static_cast<size_t>(c)][static_cast<size_t>(q)] == 0);
  }
}

TEST_CASE("perfect single-class prediction yields a diagonal confusion row") {
  auto net = build_convsnn<float>(2, 2, {1, 8, 8}, 3, base_cfg<float>());
  std::vector<Tensor<float>> zeros;
  for (const auto& w : net.weights) zeros.emplace_back(w.shape);
  // all labels are 0; the silent net predicts 0 -> perfect, diagonal
  Rng rng(5);
  std::vector<SequenceSample> samples;
  for (int i = 0; i < 4; ++i) {
    SequenceSample s;
    s.frames = random_tensor<float>({10, 1, 8, 8}, rng, 0.0, 1.0);
    s.label = 0;
    samples.push_back(std::move(s));
  }
  MaterializedDataset ds(std::move(samples), 3, 10);
  EvalResult ev = evaluate(net, zeros, ds, Phase::spiking);
  CHECK(ev.top1 == 1.0);
  CHECK(ev.confusion[0][0] == 4);

  MaterializedDataset empty({}, 3, 10);
  CHECK_THROWS_AS(evaluate(net, zeros, empty, Phase::spiking), contract_error);
}

TEST_CASE("optimizer moments persist across the analog->spiking switch") {
  auto net = build_convsnn<double>(2, 2, {1, 8, 8}, 2, base_cfg<double>(), 3);
  Rng rng(13);
  auto params0 = init_params(net, rng);
  Tensor<float> frames = random_tensor<float>({3, 1, 8, 8}, rng, 0.0, 1.0);
  MaterializedDataset ds = single_sample_set(frames, 0, 2);

  TrainSchedule<double> sched;
  sched.pretrain_epochs = 1;
  sched.total_epochs = 2;
  sched.lr = 0.01;
  sched.batch_size = 1;
  sched.seed = 5;
  sched.threads = 1;
  sched.lif = base_cfg<double>();
  TrainResult<double> res = train(net, params0, ds, ds, sched);
  CHECK(res.metrics.optimizer_steps == 2);

  // Replica: same two updates against one carried Adam state.
  auto grad_at = [&](const std::vector<Tensor<double>>& p, Phase phase) {
    Rng r0(0);
    Tape<double> tape;
    auto run = forward_window(net, p, convert_frames<double>(frames), phase,
                              Mode::train, r0, tape);
    const int loss = tape.mse(run.rates_id, one_hot<double>(0, 2));
    tape.backward(loss);
    std::vector<Tensor<double>> g;
    for (int pid : run.param_ids) g.push_back(tape.grad(pid));
    return g;
  };
  auto carried = params0;
  AdamState<double> st;
  adam_step(carried, grad_at(carried, Phase::analog), st, sched.lr);
  adam_step(carried, grad_at(carried, Phase::spiking), st, sched.lr);
  for (size_t i = 0; i < carried.size(); ++i)
    CHECK(std::memcmp(carried[i].data(), res.final_params[i].data(),
                      sizeof(double) * carried[i].size()) == 0);

  // Resetting the moments at the switch produces a different trajectory.
  auto reset = params0;
  AdamState<double> st1, st2;
  adam_step(reset, grad_at(reset, Phase::analog), st1, sched.lr);
  adam_step(reset, grad_at(reset, Phase::spiking), st2, sched.lr);
  bool differs = false;
  for (size_t i = 0; i < reset.size() && !differs; ++i)
    differs = std::memcmp(reset[i].data(), res.final_params[i].data(),
                          sizeof(double) * reset[i].size()) != 0;
  CHECK(differs);
}

TEST_CASE("phase schedule: degenerate pretrain settings") {
  auto net = build_convsnn<float>(2, 2, {1, 8, 8}, 2, base_cfg<float>(), 3);
  Rng rng(21);
  auto params = init_params(net, rng);
  Tensor<float> frames = random_tensor<float>({3, 1, 8, 8}, rng, 0.0, 1.0);
  MaterializedDataset ds = single_sample_set(frames, 0, 2);

  TrainSchedule<float> sched;
  sched.total_epochs = 3;
  sched.lr = 0.01f;
  sched.batch_size = 1;
  sched.lif = base_cfg<float>();

  sched.pretrain_epochs = 0;  // pure spiking baseline
  TrainResult<float> stbp = train(net, params, ds, ds, sched);
  for (const auto& m : stbp.metrics.history) CHECK(m.phase == Phase::spiking);

  sched.pretrain_epochs = 3;  // pure analog run
  TrainResult<float> analog = train(net, params, ds, ds, sched);
  for (const auto& m : analog.metrics.history) CHECK(m.phase == Phase::analog);

  sched.pretrain_epochs = 4;
  CHECK_THROWS_AS(train(net, params, ds, ds, sched), parameter_error);
}

TEST_CASE("single-sample overfit drives the loss to ~0, non-increasing tail") {
  auto net = build_convsnn<double>(3, 3, {1, 8, 8}, 2, base_cfg<double>(), 5);
  Rng rng(31);
  auto params = init_params(net, rng);
  Tensor<float> frames = random_tensor<float>({5, 1, 8, 8}, rng, 0.3, 1.0);
  MaterializedDataset ds = single_sample_set(frames, 1, 2);

  TrainSchedule<double> sched;
  sched.pretrain_epochs = 3;
  sched.total_epochs = 40;
  sched.lr = 0.01;
  sched.batch_size = 1;
  sched.seed = 3;
  sched.lif = base_cfg<double>();
  TrainResult<double> res = train(net, params, ds, ds, sched);

  double final_loss = res.metrics.history.back().loss;
  CHECK(final_loss <= 1e-3);
  // spiking-phase tail: loss non-increasing over any 10-epoch span after 5
  const auto& h = res.metrics.history;
  for (size_t e = 5; e + 10 < h.size(); ++e)
    CHECK(h[e + 10].loss <= h[e].loss + 1e-9);
  CHECK(res.metrics.best_test_acc == 1.0);
}

TEST_CASE("divergence aborts with a diagnostic naming the epoch") {
  auto net = build_convsnn<float>(2, 2, {1, 8, 8}, 2, base_cfg<float>(), 3);
  Rng rng(41);
  auto params = init_params(net, rng);
  Tensor<float> frames = random_tensor<float>({3, 1, 8, 8}, rng, 0.5, 1.0);
  MaterializedDataset ds = single_sample_set(frames, 0, 2);

  TrainSchedule<float> sched;
  sched.pretrain_epochs = 6;  // analog values can overflow float
  sched.total_epochs = 6;
  sched.lr = 1e30f;
  sched.batch_size = 1;
  sched.lif = base_cfg<float>();
  try {
    train(net, params, ds, ds, sched);
    CHECK(false);
  } catch (const contract_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("diverged") != std::string::npos);
  }
}

TEST_CASE("training is reproducible bit-for-bit in 64-bit mode") {
  auto net = build_convsnn<double>(2, 2, {1, 8, 8}, 2, base_cfg<double>(), 3);
  Rng rng(51);
  auto params = init_params(net, rng);
  MaterializedDataset ds = balanced_set(2, 2, 3, 8, 99);

  TrainSchedule<double> sched;
  sched.pretrain_epochs = 1;
  sched.total_epochs = 3;
  sched.lr = 0.005;
  sched.batch_size = 2;
  sched.seed = 1234;
  sched.threads = 2;
  sched.lif = base_cfg<double>();

  TrainResult<double> a = train(net, params, ds, ds, sched);
  TrainResult<double> b = train(net, params, ds, ds, sched);
  REQUIRE(a.final_params.size() == b.final_params.size());
  for (size_t i = 0; i < a.final_params.size(); ++i)
    CHECK(std::memcmp(a.final_params[i].data(), b.final_params[i].data(),
                      sizeof(double) * a.final_params[i].size()) == 0);

  // thread count must not change the result either (fixed reduction order)
  sched.threads = 1;
  TrainResult<double> c = train(net, params, ds, ds, sched);
  for (size_t i = 0; i < a.final_params.size(); ++i)
    CHECK(std::memcmp(a.final_params[i].data(), c.final_params[i].data(),
                      sizeof(double) * a.final_params[i].size()) == 0);
}

TEST_CASE("analog-phase full-network gradients match central differences") {
  // 2 conv + FC on a 4x4 input, window 3 (pools fold 4 -> 2 -> 1).
  auto net = build_convsnn<double>(2, 2, {1, 4, 4}, 2, base_cfg<double>(), 3);
  Rng rng(61);
  auto params = init_params(net, rng);
  Tensor<double> frames = random_tensor<double>({3, 1, 4, 4}, rng, 0.0, 1.0);
  Tensor<double> target = one_hot<double>(1, 2);
  auto rep = gradcheck::analog_fd_check(net, params, frames, target, 1e-3, 1e-5);
  CHECK(rep.max_rel_err <= 1e-4);
  CHECK(rep.checked > 0);
  // the seed above keeps every pre-activation clear of the kink
  CHECK(rep.excluded == 0);
}

TEST_CASE("spiking-phase full-network gradients match the scalar oracle") {
  for (bool resting : {false, true}) {
    LifConfig<double> cfg = base_cfg<double>();
    cfg.resting = resting;
    auto net = gradcheck::build_mlp_net<double>({1, 1, 2}, 2, 2, cfg, 3);

    const std::vector<double> w1 = {0.9, -0.3, 0.55, 0.8};
    const std::vector<double> w2 = {1.1, -0.6, 0.35, 0.75};
    std::vector<Tensor<double>> params = {Tensor<double>({2, 2}, std::vector<double>(w1)),
                                          Tensor<double>({2, 2}, std::vector<double>(w2))};
    const std::vector<std::vector<double>> x = {
        {0.9, 0.1}, {0.4, 0.8}, {0.7, 0.6}};
    Tensor<double> frames({3, 1, 1, 2});
    for (int t = 0; t < 3; ++t)
      for (int i = 0; i < 2; ++i)
        frames[t * 2 + i] = x[static_cast<size_t>(t)][static_cast<size_t>(i)];
    Tensor<double> target({2}, {1.0, 0.0});

    Rng rng(0);
    Tape<double> tape;
    auto run = forward_window(net, params, frames, Phase::spiking, Mode::eval,
                              rng, tape);
    const int loss = tape.mse(run.rates_id, target);
    tape.backward(loss);

    oracle::LifParams p;
    p.resting = resting;
    auto g = oracle::mlp_snn_oracle(x, 2, 2, 2, w1, w2, {1.0, 0.0}, p);

    CHECK(tape.val(loss)[0] == doctest::Approx(g.loss).epsilon(1e-12));
    const Tensor<double>& g1 = tape.grad(run.param_ids[0]);
    const Tensor<double>& g2 = tape.grad(run.param_ids[1]);
    double worst = 0;
    for (int i = 0; i < 4; ++i) {
      worst = std::max(worst, std::abs(g1[i] - g.w1[static_cast<size_t>(i)]));
      worst = std::max(worst, std::abs(g2[i] - g.w2[static_cast<size_t>(i)]));
    }
    CHECK(worst <= 1e-10);
    // the case is only meaningful if something actually spiked
    CHECK(max_abs(g1) + max_abs(g2) > 0.0);
  }
}

TEST_CASE("metrics CSV emission") {
  TempDir tmp("csv");
  std::vector<EpochMetrics> h;
  EpochMetrics m;
  m.epoch = 1;
  m.phase = Phase::analog;
  m.train_acc = 0.5;
  m.test_acc = 0.25;
  m.loss = 0.125;
  h.push_back(m);
  m.epoch = 2;
  m.phase = Phase::spiking;
  h.push_back(m);
  write_metrics_csv(tmp.file("m.csv"), h);
  std::ifstream is(tmp.file("m.csv"));
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,phase,train_acc,test_acc,loss");
  std::getline(is, line);
  CHECK(line.find("1,analog,") == 0);
  std::getline(is, line);
  CHECK(line.find("2,spiking,") == 0);

  write_confusion_csv(tmp.file("c.csv"), {{2, 0}, {1, 3}});
  std::ifstream ic(tmp.file("c.csv"));
  std::getline(ic, line);
  CHECK(line == "2,0");
}

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

#include "stsnet/tape.hpp"
#include "stsnet/tensor.hpp"
#include "testutil.hpp"

using namespace stsnet;
using testutil::random_tensor;

TEST_CASE("matmul hand examples") {
  Tensor<double> a({2, 2}, {1, 2, 3, 4});
  Tensor<double> b({2, 1}, {1, 1});
  Tensor<double> y = matmul(a, b);
  CHECK(y.shape() == std::vector<int>{2, 1});
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[1] == doctest::Approx(7.0));

  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> v({2, 1}, {5, 6});
  Tensor<double> iv = matmul(eye, v);
  CHECK(iv[0] == 5.0);
  CHECK(iv[1] == 6.0);

  Tensor<double> z({2, 3});
  Rng rng(7);
  Tensor<double> any = random_tensor<double>({3, 2}, rng);
  Tensor<double> zy = matmul(z, any);
  for (int64_t i = 0; i < zy.size(); ++i) CHECK(zy[i] == 0.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor<double> a({2, 3});
  Tensor<double> b({2, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), dimension_error);
  try {
    matmul(a, b);
  } catch (const dimension_error& e) {
    CHECK(std::string(e.what()).find("2x2") != std::string::npos);
  }
}

TEST_CASE("conv2d identity and zero kernels") {
  Rng rng(11);
  Tensor<double> x = random_tensor<double>({1, 5, 5}, rng, 0.0, 1.0);

  Tensor<double> k1({1, 1, 1, 1}, {1.0});
  Tensor<double> y = conv2d(x, k1, 1, 0);
  CHECK(y.shape() == x.shape());
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

  Tensor<double> kz({2, 1, 3, 3});
  Tensor<double> yz = conv2d(x, kz, 1, 1);
  for (int64_t i = 0; i < yz.size(); ++i) CHECK(yz[i] == 0.0);
}

TEST_CASE("conv2d all-ones 3x3 on constant image gives 9c at interior") {
  const double c = 0.37;
  Tensor<double> x = Tensor<double>::full({1, 6, 6}, c);
  Tensor<double> k = Tensor<double>::ones({1, 1, 3, 3});
  Tensor<double> y = conv2d(x, k, 1, 1);
  // interior pixel (2,2)
  CHECK(y[2 * 6 + 2] == doctest::Approx(9 * c));
  // corner sees only 4 contributions under zero padding
  CHECK(y[0] == doctest::Approx(4 * c));
}

TEST_CASE("conv2d rejects non-integral output size") {
  Tensor<double> x({1, 6, 6});
  Tensor<double> k({1, 1, 3, 3});
  CHECK_THROWS_AS(conv2d(x, k, 2, 1), dimension_error);
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
  Tensor<double> x({1, 4, 4});
  Tensor<double> k({1, 1, 7, 7});
  CHECK_THROWS_AS(conv2d(x, k, 1, 1), dimension_error);
}

TEST_CASE("avg_pool examples") {
  Tensor<double> x({1, 2, 2}, {1, 3, 5, 7});
  Tensor<double> y = avg_pool(x, 2);
  CHECK(y.size() == 1);
  CHECK(y[0] == doctest::Approx(4.0));

  Tensor<double> c = Tensor<double>::full({3, 4, 4}, 0.25);
  Tensor<double> yc = avg_pool(c, 2);
  for (int64_t i = 0; i < yc.size(); ++i) CHECK(yc[i] == doctest::Approx(0.25));

  Tensor<double> ones = Tensor<double>::ones({1, 4, 4});
  Tensor<double> yo = avg_pool(ones, 2);
  for (int64_t i = 0; i < yo.size(); ++i) CHECK(yo[i] == doctest::Approx(1.0));

  CHECK_THROWS_AS(avg_pool(Tensor<double>({1, 5, 5}), 2), dimension_error);
}

TEST_CASE("avg_pool preserves per-window means") {
  Rng rng(3);
  Tensor<double> x = random_tensor<double>({2, 6, 6}, rng);
  Tensor<double> p = avg_pool(x, 3);
  // independent window-mean oracle
  for (int c = 0; c < 2; ++c)
    for (int oy = 0; oy < 2; ++oy)
      for (int ox = 0; ox < 2; ++ox) {
        double m = 0;
        for (int dy = 0; dy < 3; ++dy)
          for (int dx = 0; dx < 3; ++dx)
            m += x[(c * 6 + oy * 3 + dy) * 6 + ox * 3 + dx];
        m /= 9.0;
        CHECK(p[(c * 2 + oy) * 2 + ox] == doctest::Approx(m).epsilon(1e-12));
      }
}

TEST_CASE("dropout_mask") {
  Rng rng(5);
  Tensor<float> m0 = dropout_mask<float>({4, 4}, 0.0, rng);
  for (int64_t i = 0; i < m0.size(); ++i) CHECK(m0[i] == 1.0f);

  Rng a(42), b(42);
  Tensor<float> ma = dropout_mask<float>({8, 8}, 0.5, a);
  Tensor<float> mb = dropout_mask<float>({8, 8}, 0.5, b);
  CHECK(std::memcmp(ma.data(), mb.data(), sizeof(float) * ma.size()) == 0);
  bool has_zero = false, has_scaled = false;
  for (int64_t i = 0; i < ma.size(); ++i) {
    if (ma[i] == 0.0f) has_zero = true;
    if (ma[i] == 2.0f) has_scaled = true;
  }
  CHECK(has_zero);
  CHECK(has_scaled);

  CHECK_THROWS_AS(dropout_mask<float>({2}, 1.0, rng), parameter_error);
  CHECK_THROWS_AS(dropout_mask<float>({2}, -0.1, rng), parameter_error);
}

TEST_CASE("backprop: loss = sum(W x) gives dW rows equal to x") {
  Tape<double> tape;
  Rng rng(13);
  Tensor<double> w = random_tensor<double>({3, 4}, rng);
  Tensor<double> x({4}, {0.5, -1.0, 2.0, 0.25});
  const int wid = tape.leaf(w);
  const int xid = tape.leaf(x);
  const int y = tape.linear(wid, xid);
  const int loss = tape.sum(y);
  tape.backward(loss);
  const Tensor<double>& gw = tape.grad(wid);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(gw[i * 4 + j] == doctest::Approx(x[j]).epsilon(1e-14));
}

TEST_CASE("backprop: disconnected parameter has zero gradient") {
  Tape<double> tape;
  const int p = tape.leaf(Tensor<double>({3}, {1, 2, 3}));
  const int q = tape.leaf(Tensor<double>({2}, {4, 5}));
  const int loss = tape.sum(q);
  tape.backward(loss);
  const Tensor<double>& gp = tape.grad(p);
  for (int64_t i = 0; i < gp.size(); ++i) CHECK(gp[i] == 0.0);
}

TEST_CASE("backprop: fan-out gradient is the sum of per-path gradients") {
  auto grad_of = [](double su, double sv) {
    Tape<double> tape;
    const int p = tape.leaf(Tensor<double>({2}, {0.3, -0.7}));
    int terms = -1;
    if (su != 0 && sv != 0)
      terms = tape.add(tape.scale(p, su), tape.scale(p, sv));
    else
      terms = tape.scale(p, su != 0 ? su : sv);
    const int loss = tape.sum(terms);
    tape.backward(loss);
    return tape.grad(p)[0];
  };
  const double two_paths = grad_of(2.0, 3.0);
  const double path_a = grad_of(2.0, 0.0);
  const double path_b = grad_of(0.0, 3.0);
  CHECK(two_paths == doctest::Approx(path_a + path_b).epsilon(1e-15));
}

TEST_CASE("finite_diff_check examples") {
  // f(x) = sum(x^2), grad = 2x
  auto f = [](const Tensor<double>& x) {
    double s = 0;
    for (int64_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
    return s;
  };
  Tensor<double> x({2}, {1.0, 2.0});
  Tensor<double> g({2}, {2.0, 4.0});
  CHECK(finite_diff_check(f, x, g, 1e-5) <= 1e-6);

  auto fc = [](const Tensor<double>&) { return 3.5; };
  Tensor<double> zero({2});
  CHECK(finite_diff_check(fc, x, zero, 1e-5) == 0.0);
}

TEST_CASE("tape gradients match central differences on every op") {
  Rng rng(101);
  // conv2d w.r.t. both input and kernel, through a smooth quadratic head.
  Tensor<double> x = random_tensor<double>({2, 6, 6}, rng);
  Tensor<double> w = random_tensor<double>({3, 2, 3, 3}, rng);

  Tape<double> t;
  const int xi = t.leaf(x);
  const int wi = t.leaf(w);
  int y = t.conv2d(xi, wi, 1, 1);
  y = t.avg_pool(y, 2);
  const int sq = t.mul(y, y);
  const int loss = t.sum(sq);
  t.backward(loss);

  auto f_x = [&](const Tensor<double>& xv) {
    Tensor<double> c = conv2d(xv, w, 1, 1);
    Tensor<double> p = avg_pool(c, 2);
    double s = 0;
    for (int64_t i = 0; i < p.size(); ++i) s += p[i] * p[i];
    return s;
  };
  auto f_w = [&](const Tensor<double>& wv) {
    Tensor<double> c = conv2d(x, wv, 1, 1);
    Tensor<double> p = avg_pool(c, 2);
    double s = 0;
    for (int64_t i = 0; i < p.size(); ++i) s += p[i] * p[i];
    return s;
  };
  CHECK(finite_diff_check(f_x, x, t.grad(xi), 1e-5) <= 1e-4);
  CHECK(finite_diff_check(f_w, w, t.grad(wi), 1e-5) <= 1e-4);
}

TEST_CASE("tape gradients: matmul, linear, global pool, concat, mse, bce") {
  Rng rng(77);
  Tensor<double> a = random_tensor<double>({3, 4}, rng);
  Tensor<double> b = random_tensor<double>({4, 2}, rng);
  {
    Tape<double> t;
    const int ai = t.leaf(a), bi = t.leaf(b);
    const int y = t.matmul(ai, bi);
    const int loss = t.sum(t.mul(y, y));
    t.backward(loss);
    auto f_a = [&](const Tensor<double>& av) {
      Tensor<double> y2 = matmul(av, b);
      double s = 0;
      for (int64_t i = 0; i < y2.size(); ++i) s += y2[i] * y2[i];
      return s;
    };
    CHECK(finite_diff_check(f_a, a, t.grad(ai), 1e-5) <= 1e-4);
  }
  {
    Tensor<double> x = random_tensor<double>({2, 4, 4}, rng);
    Tensor<double> wfc = random_tensor<double>({3, 32}, rng);
    Tensor<double> target({3}, {1.0, 0.0, 0.0});
    Tape<double> t;
    const int xi = t.leaf(x), wi = t.leaf(wfc);
    const int g = t.global_avg_pool(xi);
    const int cat = t.concat(g, g);
    (void)cat;
    const int y = t.linear(wi, xi);
    const int loss = t.mse(y, target);
    t.backward(loss);
    auto f_w = [&](const Tensor<double>& wv) {
      Tensor<double> y2 = matvec(wv, x.reshaped({32}));
      double s = 0;
      for (int64_t i = 0; i < 3; ++i) {
        const double d = y2[i] - target[i];
        s += d * d;
      }
      return s / 3.0;
    };
    CHECK(finite_diff_check(f_w, wfc, t.grad(wi), 1e-6) <= 1e-4);
  }
  {
    // bce at a point away from the clamp
    Tensor<double> r({2}, {0.3, 0.8});
    Tensor<double> target({2}, {1.0, 0.0});
    Tape<double> t;
    const int ri = t.leaf(r);
    const int loss = t.bce(ri, target);
    t.backward(loss);
    auto f = [&](const Tensor<double>& rv) {
      double s = 0;
      for (int i = 0; i < 2; ++i) {
        const double p = rv[i];
        s += -(target[i] * std::log(p) + (1 - target[i]) * std::log(1 - p));
      }
      return s / 2.0;
    };
    CHECK(finite_diff_check(f, r, t.grad(ri), 1e-7) <= 1e-4);
  }
}

TEST_CASE("backprop is linear in the loss") {
  Rng rng(19);
  Tensor<double> w = random_tensor<double>({4, 4}, rng);
  Tensor<double> x = random_tensor<double>({4}, rng);
  Tensor<double> t1({4}, {1, 0, 0, 0});
  Tensor<double> t2({4}, {0, 0, 1, 0});
  const double a = 0.7, b = -1.3;

  auto grad_with = [&](double ca, double cb) {
    Tape<double> t;
    const int wi = t.leaf(w);
    const int y = t.linear(wi, t.leaf(x));
    const int l1 = t.mse(y, t1);
    const int l2 = t.mse(y, t2);
    const int loss = t.add(t.scale(l1, ca), t.scale(l2, cb));
    t.backward(loss);
    return t.grad(wi);
  };

  Tensor<double> g_combined = grad_with(a, b);
  Tensor<double> g1 = grad_with(1.0, 0.0);
  Tensor<double> g2 = grad_with(0.0, 1.0);
  for (int64_t i = 0; i < g_combined.size(); ++i)
    CHECK(g_combined[i] ==
          doctest::Approx(a * g1[i] + b * g2[i]).epsilon(1e-12));
}

TEST_CASE("ops are bit-deterministic across runs") {
  auto run = [] {
    Rng rng(2024);
    Tensor<float> x = random_tensor<float>({3, 8, 8}, rng);
    Tensor<float> w = random_tensor<float>({4, 3, 3, 3}, rng);
    Tensor<float> y = conv2d(x, w, 1, 1);
    Tensor<float> p = avg_pool(y, 2);
    Rng drop(9);
    Tensor<float> m = dropout_mask<float>(p.shape(), 0.3, drop);
    return hadamard(p, m);
  };
  Tensor<float> r1 = run();
  Tensor<float> r2 = run();
  REQUIRE(r1.size() == r2.size());
  CHECK(std::memcmp(r1.data(), r2.data(), sizeof(float) * r1.size()) == 0);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape<double> t;
  const int p = t.leaf(Tensor<double>({3}, {1, 2, 3}));
  CHECK_THROWS_AS(t.backward(p), contract_error);
}

TEST_CASE("ops keep finite values finite") {
  Rng rng(55);
  Tensor<double> x = random_tensor<double>({2, 8, 8}, rng, -3.0, 3.0);
  Tensor<double> w = random_tensor<double>({4, 2, 3, 3}, rng, -2.0, 2.0);
  Tensor<double> y = conv2d(x, w, 1, 1);
  CHECK(y.all_finite());
  CHECK(avg_pool(y, 2).all_finite());
  CHECK(global_avg_pool(y).all_finite());
}

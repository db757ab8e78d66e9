// Copyright 2026 The ftnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "ftnet/adam.hpp"
#include "ftnet/layers.hpp"
#include "oracles.hpp"

using namespace ftnet;
using ftnet::testing::fd_gradient;
using ftnet::testing::max_rel_error;
using ftnet::testing::TestRng;

namespace {

std::vector<double> grad_of(const Tensor& t) {
  return std::vector<double>(t.grad().data(), t.grad().data() + t.grad().size());
}

// Direct nested-loop convolution, same or valid padding.
std::vector<double> naive_conv(const std::vector<double>& x, std::size_t N, std::size_t C, std::size_t H,
                               std::size_t W, const std::vector<double>& k, std::size_t O, std::size_t kh,
                               std::size_t kw, const std::vector<double>& b, std::size_t stride, bool same,
                               std::size_t& oh, std::size_t& ow) {
  const long ph = same ? static_cast<long>(kh / 2) : 0;
  const long pw = same ? static_cast<long>(kw / 2) : 0;
  oh = same ? (H + stride - 1) / stride : (H - kh) / stride + 1;
  ow = same ? (W + stride - 1) / stride : (W - kw) / stride + 1;
  std::vector<double> y(N * O * oh * ow, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = b[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long yy = static_cast<long>(i * stride + u) - ph;
                const long xx = static_cast<long>(j * stride + v) - pw;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
                acc += x[((n * C + c) * H + yy) * W + xx] * k[((o * C + c) * kh + u) * kw + v];
              }
          y[((n * O + o) * oh + i) * ow + j] = acc;
        }
  return y;
}

// Weighted sum with fixed random weights: a scalar probe that exercises
// every output element with a distinct upstream gradient.
Tensor probe(const Tensor& y, const std::vector<double>& w) { return sum(y * Tensor(y.shape(), w)); }

}  // namespace

TEST_CASE("conv2d forward examples") {
  ConvParams<double> p{Tensor({1, 1, 2, 2}, 1.0), Tensor({1}, 0.0), 1, Padding::valid};
  auto y = conv2d(Tensor({1, 1, 3, 3}, 1.0), p);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.to_vector() == std::vector<double>{4, 4, 4, 4});

  TestRng rng(1);
  Tensor x({2, 1, 4, 5}, rng.vec(40));
  ConvParams<double> id{Tensor({1, 1, 1, 1}, 1.0), Tensor({1}, 0.0), 1, Padding::same};
  CHECK(conv2d(x, id).to_vector() == x.to_vector());

  ConvParams<double> wrong{Tensor({1, 3, 3, 3}, 1.0), Tensor({1}, 0.0), 1, Padding::same};
  CHECK_THROWS_AS(conv2d(x, wrong), ShapeError);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  TestRng rng(2);
  for (std::size_t stride : {1u, 2u}) {
    for (bool same : {true, false}) {
      const std::size_t N = 2, C = 3, H = 7, W = 6, O = 4;
      auto xv = rng.vec(N * C * H * W);
      auto kv = rng.vec(O * C * 9);
      auto bv = rng.vec(O);
      std::size_t oh = 0, ow = 0;
      auto ref = naive_conv(xv, N, C, H, W, kv, O, 3, 3, bv, stride, same, oh, ow);
      ConvParams<double> p{Tensor({O, C, 3, 3}, kv), Tensor({O}, bv), stride,
                           same ? Padding::same : Padding::valid};
      auto y = conv2d(Tensor({N, C, H, W}, xv), p);
      REQUIRE(y.shape() == Shape{N, O, oh, ow});
      CHECK(max_rel_error(y.to_vector(), ref) < 1e-12);
    }
  }
}

TEST_CASE("conv2d gradients against finite differences") {
  TestRng rng(3);
  const std::size_t N = 1, C = 2, H = 5, W = 5, O = 3;
  auto xv = rng.vec(N * C * H * W);
  auto kv = rng.vec(O * C * 9);
  auto bv = rng.vec(O);
  for (std::size_t stride : {1u, 2u}) {
    std::size_t oh = (H + stride - 1) / stride, ow = (W + stride - 1) / stride;
    auto wv = rng.vec(N * O * oh * ow);
    Tensor x({N, C, H, W}, xv);
    x.set_requires_grad(true);
    ConvParams<double> p{Tensor({O, C, 3, 3}, kv), Tensor({O}, bv), stride, Padding::same};
    p.kernels.set_requires_grad(true);
    p.bias.set_requires_grad(true);
    backward(probe(conv2d(x, p), wv));

    auto loss_of = [&](const std::vector<double>& xs, const std::vector<double>& ks,
                       const std::vector<double>& bs) {
      std::size_t a = 0, b = 0;
      auto y = naive_conv(xs, N, C, H, W, ks, O, 3, 3, bs, stride, true, a, b);
      return std::inner_product(y.begin(), y.end(), wv.begin(), 0.0);
    };
    CHECK(max_rel_error(grad_of(p.kernels),
                        fd_gradient([&](const auto& k) { return loss_of(xv, k, bv); }, kv)) < 1e-5);
    CHECK(max_rel_error(grad_of(x), fd_gradient([&](const auto& v) { return loss_of(v, kv, bv); }, xv)) <
          1e-5);
    CHECK(max_rel_error(grad_of(p.bias), fd_gradient([&](const auto& b) { return loss_of(xv, kv, b); }, bv)) <
          1e-5);
  }
}

TEST_CASE("relu") {
  Tensor x({3}, std::vector<double>{-1, 0, 2});
  x.set_requires_grad(true);
  CHECK(relu(x).to_vector() == std::vector<double>{0, 0, 2});
  backward(sum(relu(x)));
  CHECK(grad_of(x) == std::vector<double>{0, 0, 1});

  Tensor pos({4}, std::vector<double>{0, 1, 2, 3});
  CHECK(relu(pos).to_vector() == pos.to_vector());
}

TEST_CASE("global pooling") {
  Tensor m({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(global_pool(m, PoolKind::avg).item() == doctest::Approx(2.5));
  CHECK(global_pool(m, PoolKind::max).item() == 4);
  Tensor one({2, 3, 1, 1}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(global_pool(one, PoolKind::avg).to_vector() == one.to_vector());
  CHECK(global_pool(one, PoolKind::max).to_vector() == one.to_vector());
  CHECK(global_pool(one, PoolKind::avg).shape() == Shape{2, 3});
}

TEST_CASE("batch_norm examples") {
  auto s = BatchNormState<double>::fresh(1);
  auto y = batch_norm(Tensor({2, 1}, std::vector<double>{0, 2}), s, Mode::train);
  CHECK(y[0] == doctest::Approx(-1).epsilon(1e-4));
  CHECK(y[1] == doctest::Approx(1).epsilon(1e-4));
  // running stats moved toward the batch: mean 1, unbiased var 2
  CHECK(s.running_mean[0] == doctest::Approx(0.1));
  CHECK(s.running_var[0] == doctest::Approx(0.9 + 0.2));

  auto z = BatchNormState<double>::fresh(2);
  z.gamma = Tensor({2}, 0.0);
  z.beta = Tensor({2}, std::vector<double>{0.5, -3});
  auto out = batch_norm(Tensor({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 7}), z, Mode::train);
  CHECK(out.to_vector() == std::vector<double>{0.5, -3, 0.5, -3, 0.5, -3});

  auto inf = BatchNormState<double>::fresh(1);
  TestRng rng(4);
  Tensor x({4, 1, 2, 2}, rng.vec(16));
  auto xi = batch_norm(x, inf, Mode::infer);
  CHECK(max_rel_error(xi.to_vector(), x.to_vector()) < 1e-5);
  CHECK(inf.running_mean[0] == 0);  // infer mode never touches running stats

  auto single = BatchNormState<double>::fresh(1);
  CHECK_THROWS_AS(batch_norm(Tensor({1, 1}, 1.0), single, Mode::train), UsageError);
}

TEST_CASE("batch_norm normalizes per channel") {
  TestRng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto s = BatchNormState<double>::fresh(3);
    Tensor x({4, 3, 3, 3}, rng.vec(108, -5, 9));
    auto y = batch_norm(x, s, Mode::train);
    for (std::size_t c = 0; c < 3; ++c) {
      double mu = 0, sq = 0;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 9; ++i) mu += y[(n * 3 + c) * 9 + i];
      mu /= 36;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 9; ++i) sq += std::pow(y[(n * 3 + c) * 9 + i] - mu, 2);
      CHECK(std::abs(mu) < 1e-6);
      CHECK(std::abs(sq / 36 - 1) < 1e-4);
    }
  }
}

TEST_CASE("batch_norm gradients") {
  TestRng rng(6);
  for (const Shape& shape : {Shape{4, 3}, Shape{3, 2, 2, 3}}) {
    const auto n = shape_size(shape);
    const auto C = shape[1];
    auto xv = rng.vec(n, -2, 2);
    auto gv = rng.vec(C, 0.5, 1.5);
    auto bv = rng.vec(C);
    auto wv = rng.vec(n);
    for (Mode mode : {Mode::train, Mode::infer}) {
      auto loss_of = [&](const std::vector<double>& xs, const std::vector<double>& gs,
                         const std::vector<double>& bs) {
        NoGradGuard ng;
        auto s = BatchNormState<double>::fresh(C);
        s.gamma = Tensor({C}, gs);
        s.beta = Tensor({C}, bs);
        s.running_mean = Tensor({C}, 0.3);
        s.running_var = Tensor({C}, 2.0);
        return probe(batch_norm(Tensor(shape, xs), s, mode), wv).item();
      };
      auto s = BatchNormState<double>::fresh(C);
      s.gamma = Tensor({C}, gv);
      s.beta = Tensor({C}, bv);
      s.running_mean = Tensor({C}, 0.3);
      s.running_var = Tensor({C}, 2.0);
      s.gamma.set_requires_grad(true);
      s.beta.set_requires_grad(true);
      Tensor x(shape, xv);
      x.set_requires_grad(true);
      backward(probe(batch_norm(x, s, mode), wv));
      CHECK(max_rel_error(grad_of(x), fd_gradient([&](const auto& v) { return loss_of(v, gv, bv); }, xv)) <
            1e-4);
      CHECK(max_rel_error(grad_of(s.gamma),
                          fd_gradient([&](const auto& v) { return loss_of(xv, v, bv); }, gv)) < 1e-4);
      CHECK(max_rel_error(grad_of(s.beta), fd_gradient([&](const auto& v) { return loss_of(xv, gv, v); }, bv)) <
            1e-4);
    }
  }
}

TEST_CASE("dense") {
  Tensor x({2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  CHECK(dense(x, eye, Tensor({2}, 0.0)).to_vector() == x.to_vector());
  auto y = dense(Tensor({1, 2}, std::vector<double>{1, 2}), Tensor({2, 1}, 1.0), Tensor({1}, 1.0));
  CHECK(y.shape() == Shape{1, 1});
  CHECK(y.item() == 4);
  CHECK_THROWS_AS(dense(x, Tensor({3, 1}, 1.0), Tensor({1}, 0.0)), ShapeError);

  TestRng rng(8);
  auto xv = rng.vec(6), wv = rng.vec(6), bv = rng.vec(2), pv = rng.vec(4);
  Tensor xt({2, 3}, xv), wt({3, 2}, wv), bt({2}, bv);
  wt.set_requires_grad(true);
  xt.set_requires_grad(true);
  backward(probe(dense(xt, wt, bt), pv));
  auto loss_of = [&](const std::vector<double>& xs, const std::vector<double>& ws) {
    double s = 0;
    for (int i = 0; i < 2; ++i)
      for (int u = 0; u < 2; ++u) {
        double acc = bv[u];
        for (int f = 0; f < 3; ++f) acc += xs[i * 3 + f] * ws[f * 2 + u];
        s += acc * pv[i * 2 + u];
      }
    return s;
  };
  CHECK(max_rel_error(grad_of(wt), fd_gradient([&](const auto& v) { return loss_of(xv, v); }, wv)) < 1e-6);
  CHECK(max_rel_error(grad_of(xt), fd_gradient([&](const auto& v) { return loss_of(v, wv); }, xv)) < 1e-6);
}

TEST_CASE("dropout") {
  Tensor x({100}, 1.5);
  auto [inf, r0] = dropout(x, 0.7, Mode::infer, RngState{1});
  CHECK(inf.to_vector() == x.to_vector());
  auto [zero, r1] = dropout(x, 0.0, Mode::train, RngState{1});
  CHECK(zero.to_vector() == x.to_vector());
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, RngState{1}), UsageError);

  // Monte-Carlo: kept elements are doubled, the mean is preserved.
  Tensor ones({1}, 3.0);
  RngState s{1000};
  double total = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    auto [y, next] = dropout(ones, 0.5, Mode::train, s);
    s = next;
    CHECK((y[0] == 0.0 || y[0] == 6.0));
    total += y[0];
  }
  CHECK(std::abs(total / trials - 3.0) < 0.05 * 3.0);

  auto [a, ra] = dropout(x, 0.3, Mode::train, RngState{42});
  auto [b, rb] = dropout(x, 0.3, Mode::train, RngState{42});
  CHECK(a.to_vector() == b.to_vector());
  CHECK(ra == rb);
}

TEST_CASE("softmax") {
  auto p = softmax(Tensor({1, 2}, 0.0));
  CHECK(p.to_vector() == std::vector<double>{0.5, 0.5});
  auto q = softmax(Tensor({1, 2}, std::vector<double>{std::log(1.0), std::log(2.0)}));
  CHECK(std::abs(q[0] - 1.0 / 3) < 1e-9);
  CHECK(std::abs(q[1] - 2.0 / 3) < 1e-9);

  TestRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto zv = rng.vec(12, -100, 100);
    auto s = softmax(Tensor({3, 4}, zv));
    for (int r = 0; r < 3; ++r) {
      double row = 0;
      for (int k = 0; k < 4; ++k) {
        CHECK(s[r * 4 + k] >= 0);
        CHECK(s[r * 4 + k] <= 1);
        row += s[r * 4 + k];
      }
      CHECK(std::abs(row - 1) < 1e-9);
    }
    auto shifted = zv;
    for (auto& z : shifted) z += 17.25;
    CHECK(max_rel_error(softmax(Tensor({3, 4}, shifted)).to_vector(), s.to_vector()) < 1e-12);
  }
  CHECK_THROWS_AS(softmax(Tensor({2, 1}, 0.0)), ShapeError);
}

TEST_CASE("softmax backward on its own") {
  TestRng rng(10);
  auto zv = rng.vec(6, -2, 2), wv = rng.vec(6);
  Tensor z({2, 3}, zv);
  z.set_requires_grad(true);
  backward(probe(softmax(z), wv));
  auto numeric = fd_gradient(
      [&](const std::vector<double>& v) {
        double s = 0;
        for (int r = 0; r < 2; ++r) {
          double m = std::max({v[r * 3], v[r * 3 + 1], v[r * 3 + 2]}), den = 0;
          for (int k = 0; k < 3; ++k) den += std::exp(v[r * 3 + k] - m);
          for (int k = 0; k < 3; ++k) s += wv[r * 3 + k] * std::exp(v[r * 3 + k] - m) / den;
        }
        return s;
      },
      zv);
  CHECK(max_rel_error(grad_of(z), numeric) < 1e-6);
}

TEST_CASE("sparse categorical cross-entropy") {
  std::vector<int> l1{1};
  CHECK(sparse_ce_loss(Tensor({1, 2}, std::vector<double>{0, 1}), l1).item() == 0);
  CHECK(sparse_ce_loss(Tensor({1, 2}, 0.5), l1).item() == doctest::Approx(0.693147).epsilon(1e-6));
  std::vector<int> l4{2, 0};
  CHECK(sparse_ce_loss(Tensor({2, 4}, 0.25), l4).item() == doctest::Approx(std::log(4.0)));
  std::vector<int> bad{2};
  CHECK_THROWS_AS(sparse_ce_loss(Tensor({1, 2}, 0.5), bad), UsageError);
}

TEST_CASE("fused softmax + cross-entropy gradient") {
  TestRng rng(11);
  std::vector<int> labels{0, 3, 1, 1, 2};
  auto zv = rng.vec(20, -3, 3);
  Tensor z({5, 4}, zv);
  z.set_requires_grad(true);
  backward(sparse_ce_loss(softmax(z), labels));
  auto numeric = fd_gradient(
      [&](const std::vector<double>& v) {
        double s = 0;
        for (int r = 0; r < 5; ++r) {
          double m = -1e300, den = 0;
          for (int k = 0; k < 4; ++k) m = std::max(m, v[r * 4 + k]);
          for (int k = 0; k < 4; ++k) den += std::exp(v[r * 4 + k] - m);
          s -= (v[r * 4 + labels[r]] - m) - std::log(den);
        }
        return s / 5;
      },
      zv);
  CHECK(max_rel_error(grad_of(z), numeric) < 1e-6);

  // Non-fused path: gradient w.r.t. probabilities directly.
  Tensor p({1, 2}, std::vector<double>{0.25, 0.75});
  p.set_requires_grad(true);
  std::vector<int> one{1};
  backward(sparse_ce_loss(p, one));
  CHECK(p.grad()[0] == 0);
  CHECK(p.grad()[1] == doctest::Approx(-1 / 0.75));
}

TEST_CASE("adam step") {
  SUBCASE("first step magnitude is lr") {
    std::vector<Tensor> params{Tensor({1}, 1.0)};
    params[0].set_requires_grad(true);
    backward(sum(params[0] * Tensor::scalar(0.5)));  // g = 0.5
    AdamState<double> s;
    adam_step(std::span<Tensor>(params), s, 1e-4);
    // m̂ = g, v̂ = g², step = lr * g / (|g| + eps)
    CHECK(params[0][0] == doctest::Approx(1 - 1e-4 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
    CHECK(std::abs(params[0][0] - 0.9999) < 1e-10);
    CHECK(s.t == 1);
  }
  SUBCASE("zero gradient leaves theta unchanged") {
    std::vector<Tensor> params{Tensor({2}, 0.7)};
    params[0].set_requires_grad(true);
    backward(sum(params[0] * Tensor::scalar(0.0)));
    AdamState<double> s;
    adam_step(std::span<Tensor>(params), s, 1e-3);
    CHECK(params[0].to_vector() == std::vector<double>{0.7, 0.7});
  }
  SUBCASE("constant gradient: constant direction, bounded steps") {
    std::vector<Tensor> params{Tensor({1}, 0.0)};
    AdamState<double> s;
    double prev = 0;
    const double lr = 1e-3;
    for (int step = 0; step < 2; ++step) {
      params[0].zero_grad();
      params[0].set_requires_grad(true);
      backward(sum(params[0] * Tensor::scalar(-2.0)));
      adam_step(std::span<Tensor>(params), s, lr);
      const double delta = params[0][0] - prev;
      CHECK(delta > 0);
      CHECK(std::abs(delta) <= lr * (1 + 1e-6));
      prev = params[0][0];
    }
    CHECK(s.t == 2);
  }
  SUBCASE("non-finite gradient names the parameter") {
    std::vector<Tensor> params{Tensor({1}, 1.0)};
    params[0].set_name("head.dense.kernel").set_requires_grad(true);
    // Inject the gradient directly: backward() itself rejects NaN.
    params[0].node()->grad_buffer()[0] = std::nan("");
    AdamState<double> s;
    try {
      adam_step(std::span<Tensor>(params), s, 1e-3);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("head.dense.kernel") != std::string::npos);
    }
  }
  SUBCASE("bit-deterministic") {
    auto run = [] {
      std::vector<Tensor> params{Tensor({3}, std::vector<double>{0.1, -0.2, 0.3})};
      params[0].set_requires_grad(true);
      AdamState<double> s;
      for (int i = 0; i < 3; ++i) {
        params[0].zero_grad();
        backward(sum(params[0] * params[0]));
        adam_step(std::span<Tensor>(params), s, 1e-2);
      }
      return params[0].to_vector();
    };
    CHECK(run() == run());
  }
}

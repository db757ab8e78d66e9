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

// Layer and loss vocabulary. Every function is differentiable through the
// tape in tensor.hpp; the fused ones (conv2d, batch_norm, dense, softmax +
// sparse_ce_loss) carry hand-written backward rules.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ftnet/rng.hpp"
#include "ftnet/tensor.hpp"

namespace ftnet {

enum class Mode { train, infer };
enum class Padding { same, valid };
enum class PoolKind { avg, max };

template <typename Scalar>
struct ConvParams {
  BasicTensor<Scalar> kernels;  // [out_ch, in_ch, kH, kW]
  BasicTensor<Scalar> bias;     // [out_ch]
  std::size_t stride = 1;
  Padding padding = Padding::same;

  std::size_t out_channels() const { return kernels.dim(0); }
  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t kernel_h() const { return kernels.dim(2); }
  std::size_t kernel_w() const { return kernels.dim(3); }
};

/// Output extent along one spatial axis. same: ceil(in/stride) using a
/// symmetric k/2 halo; valid: floor((in-k)/stride)+1.
inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, Padding p) {
  if (p == Padding::same) return (in + stride - 1) / stride;
  return (in - k) / stride + 1;
}

namespace detail {

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kh, kw, stride, pad_h, pad_w;
  std::size_t out_h, out_w;

  Eigen::Index patch() const { return static_cast<Eigen::Index>(channels * kh * kw); }
  Eigen::Index pixels() const { return static_cast<Eigen::Index>(out_h * out_w); }
};

// cols[(c*kh + i)*kw + j, oy*out_w + ox] = x[c, oy*s + i - pad_h, ox*s + j - pad_w]
template <typename Scalar>
void im2col(const Scalar* x, const ConvGeometry& g, Scalar* cols) {
  const auto P = static_cast<std::size_t>(g.pixels());
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        Scalar* row = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                         static_cast<std::ptrdiff_t>(g.pad_h);
          Scalar* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, Scalar(0));
            continue;
          }
          const Scalar* src = x + (c * g.height + static_cast<std::size_t>(y)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto xx = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                            static_cast<std::ptrdiff_t>(g.pad_w);
            dst[ox] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.width))
                          ? Scalar(0)
                          : src[xx];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const Scalar* cols, const ConvGeometry& g, Scalar* dx) {
  const auto P = static_cast<std::size_t>(g.pixels());
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const Scalar* row = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                         static_cast<std::ptrdiff_t>(g.pad_h);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          Scalar* dst = dx + (c * g.height + static_cast<std::size_t>(y)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto xx = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                            static_cast<std::ptrdiff_t>(g.pad_w);
            if (xx >= 0 && xx < static_cast<std::ptrdiff_t>(g.width)) dst[xx] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D cross-correlation (kernels are not flipped) plus bias over NCHW input.
template <typename Scalar>
BasicTensor<Scalar> conv2d(const BasicTensor<Scalar>& x, const ConvParams<Scalar>& p) {
  using T = BasicTensor<Scalar>;
  using Array = typename T::Array;
  if (x.rank() != 4) throw ShapeError("conv2d: expected NCHW input, got " + shape_str(x.shape()));
  if (p.kernels.rank() != 4 || p.bias.size() != p.out_channels()) {
    throw ShapeError("conv2d: malformed parameters");
  }
  if (x.dim(1) != p.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels, kernels expect " +
                     std::to_string(p.in_channels()));
  }
  if (p.stride == 0) throw UsageError("conv2d: stride must be positive");
  detail::ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), p.kernel_h(), p.kernel_w(), p.stride, 0, 0, 0, 0};
  if (p.padding == Padding::same) {
    if (g.kh % 2 == 0 || g.kw % 2 == 0) throw ShapeError("conv2d: same padding needs odd kernels");
    g.pad_h = g.kh / 2;
    g.pad_w = g.kw / 2;
  } else if (g.height < g.kh || g.width < g.kw) {
    throw ShapeError("conv2d: input smaller than kernel under valid padding");
  }
  g.out_h = conv_out_extent(g.height, g.kh, g.stride, p.padding);
  g.out_w = conv_out_extent(g.width, g.kw, g.stride, p.padding);

  const std::size_t batch = x.dim(0);
  const auto out_ch = static_cast<Eigen::Index>(p.out_channels());
  const Eigen::Index K = g.patch();
  const Eigen::Index P = g.pixels();
  const std::size_t in_stride = g.channels * g.height * g.width;

  auto cols = std::make_shared<Array>(static_cast<Eigen::Index>(batch) * K * P);
  Array out(static_cast<Eigen::Index>(batch) * out_ch * P);
  ConstMatMap<Scalar> w(p.kernels.values().data(), out_ch, K);
  const Array& bias = p.bias.values();
  for (std::size_t n = 0; n < batch; ++n) {
    Scalar* cn = cols->data() + static_cast<Eigen::Index>(n) * K * P;
    detail::im2col(x.values().data() + n * in_stride, g, cn);
    MatMap<Scalar> y(out.data() + static_cast<Eigen::Index>(n) * out_ch * P, out_ch, P);
    y.noalias() = w * ConstMatMap<Scalar>(cn, K, P);
    y.colwise() += bias.matrix();
  }

  auto xn = x.node();
  auto wn = p.kernels.node();
  auto bn = p.bias.node();
  return T::make_result(
      {batch, p.out_channels(), g.out_h, g.out_w}, std::move(out), {xn, wn, bn},
      [xn, wn, bn, cols, g, batch, out_ch, K, P, in_stride](typename T::Node& self) {
        ConstMatMap<Scalar> w(wn->value.data(), out_ch, K);
        RowMatrix<Scalar> dcols(K, P);
        for (std::size_t n = 0; n < batch; ++n) {
          ConstMatMap<Scalar> dy(self.grad.data() + static_cast<Eigen::Index>(n) * out_ch * P, out_ch, P);
          const Scalar* cn = cols->data() + static_cast<Eigen::Index>(n) * K * P;
          if (wn->requires_grad) {
            MatMap<Scalar>(wn->grad_buffer().data(), out_ch, K).noalias() +=
                dy * ConstMatMap<Scalar>(cn, K, P).transpose();
          }
          if (bn->requires_grad) bn->grad_buffer() += dy.rowwise().sum().array();
          if (xn->requires_grad) {
            dcols.noalias() = w.transpose() * dy;
            detail::col2im_add(dcols.data(), g, xn->grad_buffer().data() + n * in_stride);
          }
        }
      },
      "conv2d");
}

/// max(0, x); the subgradient at exactly 0 is 0.
template <typename Scalar>
BasicTensor<Scalar> relu(const BasicTensor<Scalar>& x) {
  using T = BasicTensor<Scalar>;
  auto xn = x.node();
  return T::make_result(
      x.shape(), x.values().max(Scalar(0)), {xn},
      [xn](typename T::Node& self) {
        xn->grad_buffer() += (xn->value > Scalar(0)).select(self.grad, Scalar(0));
      },
      "relu");
}

/// Per-channel spatial mean or max: [N,C,H,W] -> [N,C].
template <typename Scalar>
BasicTensor<Scalar> global_pool(const BasicTensor<Scalar>& x, PoolKind kind) {
  if (x.rank() != 4) throw ShapeError("global_pool: expected NCHW input, got " + shape_str(x.shape()));
  return reduce(kind == PoolKind::avg ? ReduceOp::mean : ReduceOp::max, x, {2, 3});
}

template <typename Scalar>
struct BatchNormState {
  BasicTensor<Scalar> gamma;  // [C]
  BasicTensor<Scalar> beta;   // [C]
  BasicTensor<Scalar> running_mean;
  BasicTensor<Scalar> running_var;
  Scalar momentum = Scalar(0.9);
  Scalar eps = Scalar(1e-5);

  static BatchNormState fresh(std::size_t channels) {
    return {BasicTensor<Scalar>({channels}, Scalar(1)), BasicTensor<Scalar>({channels}, Scalar(0)),
            BasicTensor<Scalar>({channels}, Scalar(0)), BasicTensor<Scalar>({channels}, Scalar(1)),
            Scalar(0.9), Scalar(1e-5)};
  }

  std::size_t channels() const { return gamma.size(); }
};

/// Batch normalization over [N,C] or [N,C,H,W], per channel.
///
/// Train mode normalizes with the biased batch variance and folds the
/// unbiased one into the running estimate:
///     running = momentum * running + (1 - momentum) * batch
/// Infer mode reads only the running statistics.
template <typename Scalar>
BasicTensor<Scalar> batch_norm(const BasicTensor<Scalar>& x, BatchNormState<Scalar>& s, Mode mode) {
  using T = BasicTensor<Scalar>;
  using Array = typename T::Array;
  if (x.rank() != 2 && x.rank() != 4) {
    throw ShapeError("batch_norm: expected [N,C] or [N,C,H,W], got " + shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t C = x.dim(1);
  if (C != s.channels()) throw ShapeError("batch_norm: channel count mismatch");
  const std::size_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  const auto M = static_cast<Scalar>(batch * spatial);

  // Channel-major view: column c of a [N*spatial x C] gather would be
  // strided, so walk (n, c) blocks of length `spatial` instead.
  auto block = [&](const Array& a, std::size_t n, std::size_t c) {
    return a.segment(static_cast<Eigen::Index>((n * C + c) * spatial), static_cast<Eigen::Index>(spatial));
  };

  Array mean_c(static_cast<Eigen::Index>(C));
  Array invstd_c(static_cast<Eigen::Index>(C));
  const Array& xv = x.values();
  if (mode == Mode::train) {
    if (batch < 2) throw UsageError("batch_norm: train mode needs a batch of at least 2");
    for (std::size_t c = 0; c < C; ++c) {
      Scalar acc = 0;
      for (std::size_t n = 0; n < batch; ++n) acc += block(xv, n, c).sum();
      const Scalar mu = acc / M;
      Scalar sq = 0;
      for (std::size_t n = 0; n < batch; ++n) sq += (block(xv, n, c) - mu).square().sum();
      const Scalar var = sq / M;
      const auto ci = static_cast<Eigen::Index>(c);
      mean_c[ci] = mu;
      invstd_c[ci] = Scalar(1) / std::sqrt(var + s.eps);
      const Scalar unbiased = M > 1 ? sq / (M - 1) : var;
      s.running_mean.mutable_values()[ci] = s.momentum * s.running_mean[c] + (1 - s.momentum) * mu;
      s.running_var.mutable_values()[ci] = s.momentum * s.running_var[c] + (1 - s.momentum) * unbiased;
    }
  } else {
    mean_c = s.running_mean.values();
    invstd_c = (s.running_var.values() + s.eps).rsqrt();
  }

  auto xhat = std::make_shared<Array>(xv.size());
  Array out(xv.size());
  const Array& gamma = s.gamma.values();
  const Array& beta = s.beta.values();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      const auto off = static_cast<Eigen::Index>((n * C + c) * spatial);
      const auto len = static_cast<Eigen::Index>(spatial);
      xhat->segment(off, len) = (xv.segment(off, len) - mean_c[ci]) * invstd_c[ci];
      out.segment(off, len) = xhat->segment(off, len) * gamma[ci] + beta[ci];
    }
  }

  auto xn = x.node();
  auto gn = s.gamma.node();
  auto bn = s.beta.node();
  const bool training = mode == Mode::train;
  return T::make_result(
      x.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, xhat, invstd_c, batch, C, spatial, M, training](typename T::Node& self) {
        const auto len = static_cast<Eigen::Index>(spatial);
        for (std::size_t c = 0; c < C; ++c) {
          const auto ci = static_cast<Eigen::Index>(c);
          Scalar dbeta = 0, dgamma = 0;
          for (std::size_t n = 0; n < batch; ++n) {
            const auto off = static_cast<Eigen::Index>((n * C + c) * spatial);
            dbeta += self.grad.segment(off, len).sum();
            dgamma += (self.grad.segment(off, len) * xhat->segment(off, len)).sum();
          }
          if (gn->requires_grad) gn->grad_buffer()[ci] += dgamma;
          if (bn->requires_grad) bn->grad_buffer()[ci] += dbeta;
          if (!xn->requires_grad) continue;
          const Scalar g = gn->value[ci];
          Array& dx = xn->grad_buffer();
          for (std::size_t n = 0; n < batch; ++n) {
            const auto off = static_cast<Eigen::Index>((n * C + c) * spatial);
            if (training) {
              // dx = g*invstd/M * (M*dy - sum(dy) - xhat*sum(dy*xhat))
              dx.segment(off, len) += (g * invstd_c[ci] / M) *
                                      (M * self.grad.segment(off, len) - dbeta -
                                       xhat->segment(off, len) * dgamma);
            } else {
              dx.segment(off, len) += g * invstd_c[ci] * self.grad.segment(off, len);
            }
          }
        }
      },
      "batch_norm");
}

/// x·W + b for x [N,F], W [F,U], b [U].
template <typename Scalar>
BasicTensor<Scalar> dense(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& w,
                          const BasicTensor<Scalar>& b) {
  using T = BasicTensor<Scalar>;
  using Array = typename T::Array;
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || b.size() != w.dim(1)) {
    throw ShapeError("dense: incompatible shapes " + shape_str(x.shape()) + ", " +
                     shape_str(w.shape()) + ", " + shape_str(b.shape()));
  }
  const auto N = static_cast<Eigen::Index>(x.dim(0));
  const auto F = static_cast<Eigen::Index>(x.dim(1));
  const auto U = static_cast<Eigen::Index>(w.dim(1));
  Array out(N * U);
  MatMap<Scalar> y(out.data(), N, U);
  y.noalias() = ConstMatMap<Scalar>(x.values().data(), N, F) * ConstMatMap<Scalar>(w.values().data(), F, U);
  y.rowwise() += b.values().matrix().transpose();
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  return T::make_result(
      {x.dim(0), w.dim(1)}, std::move(out), {xn, wn, bn},
      [xn, wn, bn, N, F, U](typename T::Node& self) {
        ConstMatMap<Scalar> dy(self.grad.data(), N, U);
        if (xn->requires_grad) {
          MatMap<Scalar>(xn->grad_buffer().data(), N, F).noalias() +=
              dy * ConstMatMap<Scalar>(wn->value.data(), F, U).transpose();
        }
        if (wn->requires_grad) {
          MatMap<Scalar>(wn->grad_buffer().data(), F, U).noalias() +=
              ConstMatMap<Scalar>(xn->value.data(), N, F).transpose() * dy;
        }
        if (bn->requires_grad) bn->grad_buffer() += dy.colwise().sum().transpose().array();
      },
      "dense");
}

/// Inverted dropout. Element i is kept when its uniform draw is >= rate,
/// draws taken from `rng` in flat order; kept elements scale by 1/(1-rate).
template <typename Scalar>
std::pair<BasicTensor<Scalar>, RngState> dropout(const BasicTensor<Scalar>& x, Scalar rate, Mode mode,
                                                 RngState rng) {
  using T = BasicTensor<Scalar>;
  using Array = typename T::Array;
  if (!(rate >= 0) || rate >= 1) throw UsageError("dropout: rate must lie in [0, 1)");
  if (mode == Mode::infer || rate == 0) return {x, rng};
  Rng gen(rng);
  Array mask(x.values().size());
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask[i] = gen.uniform() >= static_cast<double>(rate) ? keep_scale : Scalar(0);
  }
  auto xn = x.node();
  Array out = x.values() * mask;
  return {T::make_result(
              x.shape(), std::move(out), {xn},
              [xn, mask](typename T::Node& self) { xn->grad_buffer() += self.grad * mask; }, "dropout"),
          gen.state()};
}

/// Row-wise softmax of [N,K] logits, max-shifted.
template <typename Scalar>
BasicTensor<Scalar> softmax(const BasicTensor<Scalar>& logits) {
  using T = BasicTensor<Scalar>;
  using Array = typename T::Array;
  if (logits.rank() != 2 || logits.dim(1) < 2) {
    throw ShapeError("softmax: expected [N,K] with K >= 2, got " + shape_str(logits.shape()));
  }
  const auto N = static_cast<Eigen::Index>(logits.dim(0));
  const auto K = static_cast<Eigen::Index>(logits.dim(1));
  Array out(N * K);
  ConstMatMap<Scalar> z(logits.values().data(), N, K);
  MatMap<Scalar> p(out.data(), N, K);
  for (Eigen::Index r = 0; r < N; ++r) {
    p.row(r) = (z.row(r).array() - z.row(r).maxCoeff()).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  auto zn = logits.node();
  return T::make_result(
      logits.shape(), std::move(out), {zn},
      [zn, N, K](typename T::Node& self) {
        ConstMatMap<Scalar> p(self.value.data(), N, K);
        ConstMatMap<Scalar> g(self.grad.data(), N, K);
        MatMap<Scalar> dz(zn->grad_buffer().data(), N, K);
        for (Eigen::Index r = 0; r < N; ++r) {
          const Scalar dot = p.row(r).dot(g.row(r));
          dz.row(r).array() += p.row(r).array() * (g.row(r).array() - dot);
        }
      },
      "softmax");
}

/// Mean negative log-likelihood of integer labels under row probabilities,
/// with probabilities clamped to [1e-12, 1].
///
/// When `probs` is the direct output of softmax(), the backward pass skips
/// the softmax Jacobian and writes (probs - onehot)/N straight into the
/// logits' gradient.
template <typename Scalar>
BasicTensor<Scalar> sparse_ce_loss(const BasicTensor<Scalar>& probs, std::span<const int> labels) {
  using T = BasicTensor<Scalar>;
  using Array = typename T::Array;
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw ShapeError("sparse_ce_loss: probs " + shape_str(probs.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const auto N = static_cast<Eigen::Index>(probs.dim(0));
  const auto K = static_cast<Eigen::Index>(probs.dim(1));
  std::vector<int> y(labels.begin(), labels.end());
  for (int l : y) {
    if (l < 0 || l >= K) throw UsageError("sparse_ce_loss: label " + std::to_string(l) + " out of range");
  }
  const Array& pv = probs.values();
  constexpr Scalar kFloor = Scalar(1e-12);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const Scalar pi = std::clamp(pv[i * K + y[static_cast<std::size_t>(i)]], kFloor, Scalar(1));
    total -= std::log(pi);
  }
  Array out = Array::Constant(1, total / static_cast<Scalar>(N));

  auto pn = probs.node();
  const bool fused = std::string_view(pn->op) == "softmax" && !pn->parents.empty();
  std::vector<std::shared_ptr<typename T::Node>> parents;
  if (fused) parents.push_back(pn->parents.front());
  else parents.push_back(pn);
  return T::make_result(
      Shape{}, std::move(out), std::move(parents),
      [pn, y, N, K, fused](typename T::Node& self) {
        const Scalar g = self.grad[0];
        if (fused) {
          auto& zn = pn->parents.front();
          Array& dz = zn->grad_buffer();
          for (Eigen::Index i = 0; i < N; ++i) {
            for (Eigen::Index k = 0; k < K; ++k) {
              const Scalar onehot = k == y[static_cast<std::size_t>(i)] ? Scalar(1) : Scalar(0);
              dz[i * K + k] += g * (pn->value[i * K + k] - onehot) / static_cast<Scalar>(N);
            }
          }
          return;
        }
        Array& dp = pn->grad_buffer();
        for (Eigen::Index i = 0; i < N; ++i) {
          const Eigen::Index at = i * K + y[static_cast<std::size_t>(i)];
          const Scalar pi = pn->value[at];
          if (pi > kFloor && pi <= Scalar(1)) dp[at] -= g / (static_cast<Scalar>(N) * pi);
        }
      },
      "sparse_ce_loss");
}

}  // namespace ftnet

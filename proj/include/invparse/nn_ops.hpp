#pragma once

// Dense forward/backward kernels for a pre-LN transformer. Activations are
// laid out one token per row. Every backward function accumulates into the
// parameter gradients it is handed and returns (or writes) the gradient
// with respect to its input.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace invparse::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------- linear

template <typename Scalar>
Matrix<Scalar> linear_forward(const Matrix<Scalar>& x, const Matrix<Scalar>& weight,
                              const Matrix<Scalar>& bias) {
  Matrix<Scalar> y = x * weight;
  y.rowwise() += bias.row(0);
  return y;
}

template <typename Scalar>
Matrix<Scalar> linear_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& x,
                               const Matrix<Scalar>& weight, Matrix<Scalar>& dweight,
                               Matrix<Scalar>& dbias) {
  dweight.noalias() += x.transpose() * dy;
  dbias.row(0) += dy.colwise().sum();
  return dy * weight.transpose();
}

// ------------------------------------------------------------ layer norm

template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> xhat;
  Vector<Scalar> inv_std;
};

template <typename Scalar>
Matrix<Scalar> layer_norm_forward(const Matrix<Scalar>& x, const Matrix<Scalar>& gain,
                                  const Matrix<Scalar>& bias, LayerNormCache<Scalar>& cache,
                                  Scalar eps = Scalar(1e-5)) {
  const auto n = static_cast<Scalar>(x.cols());
  Vector<Scalar> mean = x.rowwise().sum() / n;
  cache.xhat = x.colwise() - mean;
  Vector<Scalar> var = cache.xhat.array().square().rowwise().sum() / n;
  cache.inv_std = (var.array() + eps).rsqrt();
  cache.xhat = cache.inv_std.asDiagonal() * cache.xhat;
  Matrix<Scalar> y = cache.xhat * gain.row(0).asDiagonal();
  y.rowwise() += bias.row(0);
  return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& gain,
                                   const LayerNormCache<Scalar>& cache, Matrix<Scalar>& dgain,
                                   Matrix<Scalar>& dbias) {
  dgain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Matrix<Scalar> dxhat = dy * gain.row(0).asDiagonal();
  const auto n = static_cast<Scalar>(dy.cols());
  Vector<Scalar> mean_d = dxhat.rowwise().sum() / n;
  Vector<Scalar> mean_dx = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix() / n;
  Matrix<Scalar> dx = dxhat.colwise() - mean_d;
  dx -= cache.xhat.cwiseProduct(mean_dx.replicate(1, dy.cols()));
  return cache.inv_std.asDiagonal() * dx;
}

// ------------------------------------------------------------------ gelu

namespace detail {

// tanh through exp so the whole array vectorizes in double as well.
template <typename Scalar>
Matrix<Scalar> gelu_tanh(const Matrix<Scalar>& x) {
  const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  const auto u = (c * (x.array() + Scalar(0.044715) * x.array().cube())).eval();
  return (Scalar(1) - Scalar(2) / ((Scalar(2) * u).exp() + Scalar(1))).matrix();
}

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> gelu_forward(const Matrix<Scalar>& x) {
  const Matrix<Scalar> t = detail::gelu_tanh(x);
  return (Scalar(0.5) * x.array() * (Scalar(1) + t.array())).matrix();
}

template <typename Scalar>
Matrix<Scalar> gelu_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& x) {
  const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  const Matrix<Scalar> t = detail::gelu_tanh(x);
  const auto xa = x.array();
  const auto ta = t.array();
  return (dy.array() * (Scalar(0.5) * (Scalar(1) + ta) + Scalar(0.5) * xa * (Scalar(1) - ta.square()) * c *
                                                            (Scalar(1) + Scalar(3 * 0.044715) * xa.square())))
      .matrix();
}

// --------------------------------------------------------------- softmax

/// Row-wise softmax in place. Masked entries may be -infinity.
template <typename Scalar>
void softmax_rows(Matrix<Scalar>& m) {
  const Vector<Scalar> mx = m.rowwise().maxCoeff();
  m.colwise() -= mx;
  m = m.array().exp().matrix();
  const Vector<Scalar> inv = m.rowwise().sum().cwiseInverse();
  m = inv.asDiagonal() * m;
}

// ------------------------------------------------------------- attention

template <typename Scalar>
struct AttentionParams {
  Matrix<Scalar> wq, wk, wv, wo;
  Matrix<Scalar> bq, bk, bv, bo;  // 1 x d
};

template <typename Scalar>
struct AttentionCache {
  Matrix<Scalar> xq, xkv;
  Matrix<Scalar> q, k, v;
  std::vector<Matrix<Scalar>> probs;  // one (Lq x Lk) per head
  Matrix<Scalar> context;             // heads concatenated, before wo
};

/// Multi-head scaled dot-product attention. Queries come from `xq`, keys
/// and values from `xkv`. With `causal`, query i attends to keys <= i.
template <typename Scalar>
Matrix<Scalar> attention_forward(const Matrix<Scalar>& xq, const Matrix<Scalar>& xkv,
                                 const AttentionParams<Scalar>& p, int heads, bool causal,
                                 AttentionCache<Scalar>& c) {
  const Eigen::Index d = p.wq.cols();
  const Eigen::Index dk = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));
  c.xq = xq;
  c.xkv = xkv;
  c.q = linear_forward(xq, p.wq, p.bq);
  c.k = linear_forward(xkv, p.wk, p.bk);
  c.v = linear_forward(xkv, p.wv, p.bv);
  c.probs.resize(static_cast<std::size_t>(heads));
  c.context.resize(xq.rows(), d);
  for (int h = 0; h < heads; ++h) {
    Matrix<Scalar>& s = c.probs[static_cast<std::size_t>(h)];
    s.noalias() = c.q.middleCols(h * dk, dk) * c.k.middleCols(h * dk, dk).transpose();
    s *= scale;
    if (causal) {
      for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(i, j) = -std::numeric_limits<Scalar>::infinity();
    }
    softmax_rows(s);
    if (causal) s.template triangularView<Eigen::StrictlyUpper>().setZero();
    c.context.middleCols(h * dk, dk).noalias() = s * c.v.middleCols(h * dk, dk);
  }
  return linear_forward(c.context, p.wo, p.bo);
}

template <typename Scalar>
void attention_backward(const Matrix<Scalar>& dout, const AttentionParams<Scalar>& p, int heads,
                        const AttentionCache<Scalar>& c, AttentionParams<Scalar>& g,
                        Matrix<Scalar>& dxq, Matrix<Scalar>& dxkv) {
  const Eigen::Index d = p.wq.cols();
  const Eigen::Index dk = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));
  Matrix<Scalar> dcontext = linear_backward(dout, c.context, p.wo, g.wo, g.bo);
  Matrix<Scalar> dq(c.q.rows(), d), dk_all(c.k.rows(), d), dv(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Matrix<Scalar>& prob = c.probs[static_cast<std::size_t>(h)];
    const auto dctx_h = dcontext.middleCols(h * dk, dk);
    dv.middleCols(h * dk, dk).noalias() = prob.transpose() * dctx_h;
    Matrix<Scalar> dp = dctx_h * c.v.middleCols(h * dk, dk).transpose();
    Vector<Scalar> row_dot = (dp.array() * prob.array()).rowwise().sum();
    Matrix<Scalar> ds = prob.cwiseProduct(dp.colwise() - row_dot);
    ds *= scale;
    dq.middleCols(h * dk, dk).noalias() = ds * c.k.middleCols(h * dk, dk);
    dk_all.middleCols(h * dk, dk).noalias() = ds.transpose() * c.q.middleCols(h * dk, dk);
  }
  dxq = linear_backward(dq, c.xq, p.wq, g.wq, g.bq);
  dxkv = linear_backward(dk_all, c.xkv, p.wk, g.wk, g.bk);
  dxkv += linear_backward(dv, c.xkv, p.wv, g.wv, g.bv);
}

// ----------------------------------------------------------- feedforward

template <typename Scalar>
struct FeedForwardParams {
  Matrix<Scalar> w1, b1, w2, b2;
};

template <typename Scalar>
struct FeedForwardCache {
  Matrix<Scalar> x, pre, act;
};

template <typename Scalar>
Matrix<Scalar> feed_forward_forward(const Matrix<Scalar>& x, const FeedForwardParams<Scalar>& p,
                                    FeedForwardCache<Scalar>& c) {
  c.x = x;
  c.pre = linear_forward(x, p.w1, p.b1);
  c.act = gelu_forward(c.pre);
  return linear_forward(c.act, p.w2, p.b2);
}

template <typename Scalar>
Matrix<Scalar> feed_forward_backward(const Matrix<Scalar>& dy, const FeedForwardParams<Scalar>& p,
                                     const FeedForwardCache<Scalar>& c, FeedForwardParams<Scalar>& g) {
  Matrix<Scalar> dact = linear_backward(dy, c.act, p.w2, g.w2, g.b2);
  Matrix<Scalar> dpre = gelu_backward(dact, c.pre);
  return linear_backward(dpre, c.x, p.w1, g.w1, g.b1);
}

// ----------------------------------------------------- cross entropy

/// Sum over rows of -log softmax(logits)[row, target]. When `dlogits` is
/// non-null it receives scale * (softmax - onehot).
template <typename Scalar>
Scalar softmax_cross_entropy(const Matrix<Scalar>& logits, const std::vector<int>& targets, Scalar scale,
                             Matrix<Scalar>* dlogits) {
  Matrix<Scalar> prob = logits;
  const Vector<Scalar> mx = prob.rowwise().maxCoeff();
  prob.colwise() -= mx;
  prob = prob.array().exp().matrix();
  const Vector<Scalar> z = prob.rowwise().sum();
  prob = z.cwiseInverse().asDiagonal() * prob;
  Scalar total = 0;
  for (Eigen::Index r = 0; r < prob.rows(); ++r) {
    const auto t = targets[static_cast<std::size_t>(r)];
    total += -(logits(r, t) - mx(r) - std::log(z(r)));
    prob(r, t) -= Scalar(1);
  }
  if (dlogits != nullptr) *dlogits = prob * scale;
  return total;
}

// ---------------------------------------------------------- positional

template <typename Scalar>
Matrix<Scalar> sinusoidal_positions(Eigen::Index length, Eigen::Index dim) {
  Matrix<Scalar> pe(length, dim);
  for (Eigen::Index pos = 0; pos < length; ++pos) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const Scalar rate = std::pow(Scalar(10000), -static_cast<Scalar>(2 * (i / 2)) / static_cast<Scalar>(dim));
      const Scalar angle = static_cast<Scalar>(pos) * rate;
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

}  // namespace invparse::nn

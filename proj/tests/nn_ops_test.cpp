#include <cmath>
#include <functional>

#include "doctest.h"
#include "invparse/nn_ops.hpp"
#include "invparse/rng.hpp"

using namespace invparse;
using nn::Matrix;
using M = Matrix<double>;

namespace {

M random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * s;
  return m;
}

// Loss = <forward(inputs), probe>. Compares the analytic gradient of every
// input in `inputs` with central differences.
double max_fd_error(const std::vector<M*>& inputs, const std::vector<const M*>& analytic,
                    const std::function<double()>& loss) {
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    M& x = *inputs[t];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double keep = x.data()[i];
      x.data()[i] = keep + eps;
      const double up = loss();
      x.data()[i] = keep - eps;
      const double down = loss();
      x.data()[i] = keep;
      const double numeric = (up - down) / (2 * eps);
      const double a = analytic[t]->data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
  }
  return worst;
}

double dot(const M& a, const M& b) { return (a.array() * b.array()).sum(); }

}  // namespace

TEST_CASE("linear backward") {
  Rng rng(1);
  M x = random_matrix(3, 4, rng), w = random_matrix(4, 5, rng), b = random_matrix(1, 5, rng);
  const M probe = random_matrix(3, 5, rng);
  M dw = M::Zero(4, 5), db = M::Zero(1, 5);
  const M dx = nn::linear_backward<double>(probe, x, w, dw, db);
  auto loss = [&] { return dot(nn::linear_forward<double>(x, w, b), probe); };
  CHECK(max_fd_error({&x, &w, &b}, {&dx, &dw, &db}, loss) < 1e-6);
}

TEST_CASE("layer norm forward and backward") {
  Rng rng(2);
  M x = random_matrix(4, 6, rng), gain = random_matrix(1, 6, rng), bias = random_matrix(1, 6, rng);
  nn::LayerNormCache<double> cache;
  const M y = nn::layer_norm_forward<double>(x, M::Ones(1, 6), M::Zero(1, 6), cache);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    CHECK(std::abs(y.row(r).mean()) < 1e-12);
    CHECK(std::abs(y.row(r).array().square().mean() - 1.0) < 1e-4);
  }
  const M probe = random_matrix(4, 6, rng);
  nn::layer_norm_forward<double>(x, gain, bias, cache);
  M dg = M::Zero(1, 6), db = M::Zero(1, 6);
  const M dx = nn::layer_norm_backward<double>(probe, gain, cache, dg, db);
  auto loss = [&] {
    nn::LayerNormCache<double> c;
    return dot(nn::layer_norm_forward<double>(x, gain, bias, c), probe);
  };
  CHECK(max_fd_error({&x, &gain, &bias}, {&dx, &dg, &db}, loss) < 1e-5);
}

TEST_CASE("gelu matches the tanh form and its derivative") {
  Rng rng(3);
  M x = random_matrix(5, 7, rng, 2.0);
  const M y = nn::gelu_forward<double>(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    const double ref = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) * (v + 0.044715 * v * v * v)));
    CHECK(y.data()[i] == doctest::Approx(ref).epsilon(1e-12));
  }
  const M probe = random_matrix(5, 7, rng);
  const M dx = nn::gelu_backward<double>(probe, x);
  auto loss = [&] { return dot(nn::gelu_forward<double>(x), probe); };
  CHECK(max_fd_error({&x}, {&dx}, loss) < 1e-6);
}

TEST_CASE("softmax rows handle masked entries") {
  M m(2, 3);
  m << 1, 2, 3, 0, -std::numeric_limits<double>::infinity(), 0;
  nn::softmax_rows(m);
  CHECK(m.row(0).sum() == doctest::Approx(1.0));
  CHECK(m(0, 2) == doctest::Approx(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
  CHECK(m(1, 1) == 0.0);
  CHECK(m(1, 0) == doctest::Approx(0.5));
  M big(1, 2);
  big << 1000, 1000;
  nn::softmax_rows(big);
  CHECK(big(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("attention backward, self and cross, causal and not") {
  for (bool causal : {false, true}) {
    for (Eigen::Index lk : {4, 6}) {
      if (causal && lk != 4) continue;
      Rng rng(4 + static_cast<std::uint64_t>(lk));
      const Eigen::Index d = 8, lq = 4;
      nn::AttentionParams<double> p{random_matrix(d, d, rng, 0.4), random_matrix(d, d, rng, 0.4),
                                    random_matrix(d, d, rng, 0.4), random_matrix(d, d, rng, 0.4),
                                    random_matrix(1, d, rng, 0.1), random_matrix(1, d, rng, 0.1),
                                    random_matrix(1, d, rng, 0.1), random_matrix(1, d, rng, 0.1)};
      M xq = random_matrix(lq, d, rng), xkv = random_matrix(lk, d, rng);
      const M probe = random_matrix(lq, d, rng);
      nn::AttentionCache<double> c;
      nn::attention_forward<double>(xq, xkv, p, 2, causal, c);
      nn::AttentionParams<double> g{M::Zero(d, d), M::Zero(d, d), M::Zero(d, d), M::Zero(d, d),
                                    M::Zero(1, d), M::Zero(1, d), M::Zero(1, d), M::Zero(1, d)};
      M dxq, dxkv;
      nn::attention_backward<double>(probe, p, 2, c, g, dxq, dxkv);
      auto loss = [&] {
        nn::AttentionCache<double> cc;
        return dot(nn::attention_forward<double>(xq, xkv, p, 2, causal, cc), probe);
      };
      CHECK(max_fd_error({&xq, &xkv, &p.wq, &p.wk, &p.wv, &p.wo, &p.bq, &p.bv, &p.bo},
                         {&dxq, &dxkv, &g.wq, &g.wk, &g.wv, &g.wo, &g.bq, &g.bv, &g.bo}, loss) < 1e-5);
      if (causal) {
        for (const auto& probs : c.probs)
          for (Eigen::Index i = 0; i < probs.rows(); ++i)
            for (Eigen::Index j = i + 1; j < probs.cols(); ++j) CHECK(probs(i, j) == 0.0);
      }
    }
  }
}

TEST_CASE("feed forward backward") {
  Rng rng(6);
  nn::FeedForwardParams<double> p{random_matrix(4, 8, rng, 0.5), random_matrix(1, 8, rng, 0.1),
                                  random_matrix(8, 4, rng, 0.5), random_matrix(1, 4, rng, 0.1)};
  M x = random_matrix(3, 4, rng);
  const M probe = random_matrix(3, 4, rng);
  nn::FeedForwardCache<double> c;
  nn::feed_forward_forward<double>(x, p, c);
  nn::FeedForwardParams<double> g{M::Zero(4, 8), M::Zero(1, 8), M::Zero(8, 4), M::Zero(1, 4)};
  const M dx = nn::feed_forward_backward<double>(probe, p, c, g);
  auto loss = [&] {
    nn::FeedForwardCache<double> cc;
    return dot(nn::feed_forward_forward<double>(x, p, cc), probe);
  };
  CHECK(max_fd_error({&x, &p.w1, &p.b1, &p.w2, &p.b2}, {&dx, &g.w1, &g.b1, &g.w2, &g.b2}, loss) < 1e-5);
}

TEST_CASE("cross entropy value and gradient") {
  Rng rng(7);
  M logits = random_matrix(3, 5, rng);
  const std::vector<int> targets{0, 4, 2};
  M dlogits;
  const double total = nn::softmax_cross_entropy<double>(logits, targets, 0.5, &dlogits);
  double ref = 0.0;
  for (int r = 0; r < 3; ++r) {
    const double z = logits.row(r).array().exp().sum();
    ref -= std::log(std::exp(logits(r, targets[static_cast<std::size_t>(r)])) / z);
  }
  CHECK(total == doctest::Approx(ref).epsilon(1e-12));
  M scaled = dlogits * 2.0;
  auto loss = [&] { return nn::softmax_cross_entropy<double>(logits, targets, 1.0, nullptr); };
  CHECK(max_fd_error({&logits}, {&scaled}, loss) < 1e-6);

  const M uniform = M::Zero(2, 7);
  CHECK(nn::softmax_cross_entropy<double>(uniform, {1, 3}, 1.0, nullptr) == doctest::Approx(2 * std::log(7.0)));
}

TEST_CASE("sinusoidal positions") {
  const M pe = nn::sinusoidal_positions<double>(10, 6);
  CHECK(pe(0, 0) == 0.0);
  CHECK(pe(0, 1) == 1.0);
  CHECK(pe(3, 0) == doctest::Approx(std::sin(3.0)));
  CHECK(pe(3, 2) == doctest::Approx(std::sin(3.0 / std::pow(10000.0, 2.0 / 6.0))));
  CHECK(pe(5, 5) == doctest::Approx(std::cos(5.0 / std::pow(10000.0, 4.0 / 6.0))));
}

TEST_CASE("single precision kernels agree with double") {
  Rng rng(8);
  const M x = random_matrix(4, 6, rng), w = random_matrix(6, 6, rng, 0.3), b = random_matrix(1, 6, rng, 0.1);
  const Matrix<float> xf = x.cast<float>(), wf = w.cast<float>(), bf = b.cast<float>();
  nn::LayerNormCache<double> cd;
  nn::LayerNormCache<float> cf;
  const M yd = nn::gelu_forward<double>(
      nn::layer_norm_forward<double>(nn::linear_forward<double>(x, w, b), M::Ones(1, 6), M::Zero(1, 6), cd));
  const Matrix<float> yf = nn::gelu_forward<float>(nn::layer_norm_forward<float>(
      nn::linear_forward<float>(xf, wf, bf), Matrix<float>::Ones(1, 6), Matrix<float>::Zero(1, 6), cf));
  CHECK((yd - yf.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}

#pragma once

#include <cmath>
#include <vector>

#include "mpm/error.hpp"
#include "mpm/nn/layers.hpp"

namespace mpm::nn {

struct BlockShape {
  int model_dim = 128;
  int num_heads = 4;
  int feedforward_dim = 512;
  int conv_kernel_size = 7;
};

/// Pre-norm feed-forward branch: LN -> Linear -> Swish -> Linear.
template <typename Scalar>
class FeedForward {
 public:
  struct Cache {
    typename LayerNorm<Scalar>::Cache norm;
    typename Linear<Scalar>::Cache up, down;
    Matrix<Scalar> hidden;  // pre-activation
  };

  FeedForward() = default;
  FeedForward(int dim, int hidden) : norm(dim), up(dim, hidden), down(hidden, dim) {}

  template <typename Rng>
  void init(Rng& rng) {
    up.init(rng);
    down.init(rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* c = nullptr) const {
    Matrix<Scalar> h = up.forward(norm.forward(x, c ? &c->norm : nullptr), c ? &c->up : nullptr);
    Matrix<Scalar> a = swish(h);
    if (c) c->hidden = std::move(h);
    return down.forward(a, c ? &c->down : nullptr);
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const Cache& c) {
    Matrix<Scalar> da = down.backward(dy, c.down);
    return norm.backward(up.backward(swish_backward(da, c.hidden), c.up), c.norm);
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    norm.visit(join_name(p, "norm"), f);
    up.visit(join_name(p, "up"), f);
    down.visit(join_name(p, "down"), f);
  }

  LayerNorm<Scalar> norm;
  Linear<Scalar> up, down;
};

/// Pre-norm multi-head self-attention over the whole sequence (no causal or
/// padding mask; one utterance per call).
template <typename Scalar>
class SelfAttention {
 public:
  struct Cache {
    typename LayerNorm<Scalar>::Cache norm;
    typename Linear<Scalar>::Cache query_in, key_in, value_in, out;
    Matrix<Scalar> q, k, v;
    std::vector<Matrix<Scalar>> probs;  // per head, T x T
  };

  SelfAttention() = default;
  SelfAttention(int dim, int heads)
      : norm(dim), query(dim, dim), key(dim, dim), value(dim, dim), out(dim, dim), heads_(heads) {
    if (heads <= 0 || dim % heads != 0) {
      throw Error(ErrorCode::kConfig, "model_dim must be divisible by num_heads");
    }
  }

  template <typename Rng>
  void init(Rng& rng) {
    query.init(rng);
    key.init(rng);
    value.init(rng);
    out.init(rng);
  }

  int num_heads() const { return heads_; }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* c = nullptr) const {
    const Matrix<Scalar> h = norm.forward(x, c ? &c->norm : nullptr);
    Matrix<Scalar> q = query.forward(h, c ? &c->query_in : nullptr);
    Matrix<Scalar> k = key.forward(h, c ? &c->key_in : nullptr);
    Matrix<Scalar> v = value.forward(h, c ? &c->value_in : nullptr);
    const Eigen::Index T = x.rows();
    const int dh = static_cast<int>(x.cols()) / heads_;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    Matrix<Scalar> ctx(T, x.cols());
    if (c) c->probs.resize(static_cast<std::size_t>(heads_));
    for (int hd = 0; hd < heads_; ++hd) {
      Matrix<Scalar> scores(T, T);
      scores.noalias() = q.middleCols(hd * dh, dh) * k.middleCols(hd * dh, dh).transpose();
      scores *= scale;
      Matrix<Scalar> p = softmax_rows(scores);
      ctx.middleCols(hd * dh, dh).noalias() = p * v.middleCols(hd * dh, dh);
      if (c) c->probs[static_cast<std::size_t>(hd)] = std::move(p);
    }
    if (c) {
      c->q = std::move(q);
      c->k = std::move(k);
      c->v = std::move(v);
    }
    return out.forward(ctx, c ? &c->out : nullptr);
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const Cache& c) {
    const Matrix<Scalar> dctx = out.backward(dy, c.out);
    const Eigen::Index T = dy.rows();
    const int dh = static_cast<int>(dy.cols()) / heads_;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    Matrix<Scalar> dq(T, dy.cols()), dk(T, dy.cols()), dv(T, dy.cols());
    for (int hd = 0; hd < heads_; ++hd) {
      const Matrix<Scalar>& p = c.probs[static_cast<std::size_t>(hd)];
      const auto dctx_h = dctx.middleCols(hd * dh, dh);
      Matrix<Scalar> dp(T, T);
      dp.noalias() = dctx_h * c.v.middleCols(hd * dh, dh).transpose();
      dv.middleCols(hd * dh, dh).noalias() = p.transpose() * dctx_h;
      const Vector<Scalar> row_dot = (dp.array() * p.array()).rowwise().sum();
      Matrix<Scalar> ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix();
      ds *= scale;
      dq.middleCols(hd * dh, dh).noalias() = ds * c.k.middleCols(hd * dh, dh);
      dk.middleCols(hd * dh, dh).noalias() = ds.transpose() * c.q.middleCols(hd * dh, dh);
    }
    Matrix<Scalar> dh_in = query.backward(dq, c.query_in);
    dh_in += key.backward(dk, c.key_in);
    dh_in += value.backward(dv, c.value_in);
    return norm.backward(dh_in, c.norm);
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    norm.visit(join_name(p, "norm"), f);
    query.visit(join_name(p, "query"), f);
    key.visit(join_name(p, "key"), f);
    value.visit(join_name(p, "value"), f);
    out.visit(join_name(p, "out"), f);
  }

  LayerNorm<Scalar> norm;
  Linear<Scalar> query, key, value, out;

 private:
  int heads_ = 1;
};

/// Pre-norm convolution branch: LN -> pointwise (2d) -> GLU -> depthwise
/// conv over time (zero "same" padding) -> LN -> Swish -> pointwise.
/// Layer norm stands in for batch norm so utterances stay independent.
template <typename Scalar>
class ConvModule {
 public:
  struct Cache {
    typename LayerNorm<Scalar>::Cache norm, conv_norm;
    typename Linear<Scalar>::Cache expand, project;
    Matrix<Scalar> expanded;  // T x 2d, pre-GLU
    Matrix<Scalar> gated;     // T x d, conv input
    Matrix<Scalar> conv_out;  // T x d, pre-norm
    Matrix<Scalar> normed;    // T x d, pre-swish
  };

  ConvModule() = default;
  ConvModule(int dim, int kernel)
      : norm(dim), expand(dim, 2 * dim), depthwise(kernel, dim), depthwise_bias(1, dim), conv_norm(dim),
        project(dim, dim) {
    if (kernel < 1 || kernel % 2 == 0) throw Error(ErrorCode::kConfig, "conv kernel size must be odd");
  }

  template <typename Rng>
  void init(Rng& rng) {
    expand.init(rng);
    fill_uniform(depthwise.value, 1.0 / std::sqrt(static_cast<double>(depthwise.value.rows())), rng);
    depthwise_bias.value.setZero();
    project.init(rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* c = nullptr) const {
    const Eigen::Index T = x.rows(), d = x.cols();
    Matrix<Scalar> e = expand.forward(norm.forward(x, c ? &c->norm : nullptr), c ? &c->expand : nullptr);
    Matrix<Scalar> g = (e.leftCols(d).array() * sigmoid<Scalar>(e.rightCols(d)).array()).matrix();
    const Eigen::Index K = depthwise.value.rows(), half = K / 2;
    Matrix<Scalar> conv = Matrix<Scalar>::Zero(T, d);
    conv.rowwise() += depthwise_bias.value.row(0);
    for (Eigen::Index k = 0; k < K; ++k) {
      const Eigen::Index shift = k - half;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index t1 = std::min<Eigen::Index>(T, T - shift);
      if (t1 <= t0) continue;
      conv.middleRows(t0, t1 - t0).array() +=
          g.middleRows(t0 + shift, t1 - t0).array().rowwise() * depthwise.value.row(k).array();
    }
    Matrix<Scalar> n = conv_norm.forward(conv, c ? &c->conv_norm : nullptr);
    Matrix<Scalar> y = project.forward(swish(n), c ? &c->project : nullptr);
    if (c) {
      c->expanded = std::move(e);
      c->gated = std::move(g);
      c->conv_out = std::move(conv);
      c->normed = std::move(n);
    }
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const Cache& c) {
    const Eigen::Index T = dy.rows(), d = dy.cols();
    Matrix<Scalar> dn = swish_backward(project.backward(dy, c.project), c.normed);
    Matrix<Scalar> dconv = conv_norm.backward(dn, c.conv_norm);
    depthwise_bias.grad.row(0) += dconv.colwise().sum();
    const Eigen::Index K = depthwise.value.rows(), half = K / 2;
    Matrix<Scalar> dg = Matrix<Scalar>::Zero(T, d);
    for (Eigen::Index k = 0; k < K; ++k) {
      const Eigen::Index shift = k - half;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index t1 = std::min<Eigen::Index>(T, T - shift);
      if (t1 <= t0) continue;
      const auto dy_rows = dconv.middleRows(t0, t1 - t0).array();
      depthwise.grad.row(k) += (dy_rows * c.gated.middleRows(t0 + shift, t1 - t0).array()).colwise().sum().matrix();
      dg.middleRows(t0 + shift, t1 - t0).array() += dy_rows.rowwise() * depthwise.value.row(k).array();
    }
    const Matrix<Scalar> sg = sigmoid<Scalar>(c.expanded.rightCols(d));
    Matrix<Scalar> de(T, 2 * d);
    de.leftCols(d) = (dg.array() * sg.array()).matrix();
    de.rightCols(d) =
        (dg.array() * c.expanded.leftCols(d).array() * sg.array() * (Scalar(1) - sg.array())).matrix();
    return norm.backward(expand.backward(de, c.expand), c.norm);
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    norm.visit(join_name(p, "norm"), f);
    expand.visit(join_name(p, "expand"), f);
    f(join_name(p, "depthwise.weight"), depthwise);
    f(join_name(p, "depthwise.bias"), depthwise_bias);
    conv_norm.visit(join_name(p, "conv_norm"), f);
    project.visit(join_name(p, "project"), f);
  }

  LayerNorm<Scalar> norm;
  Linear<Scalar> expand;
  Parameter<Scalar> depthwise;  // kernel x dim
  Parameter<Scalar> depthwise_bias;
  LayerNorm<Scalar> conv_norm;
  Linear<Scalar> project;
};

/// x + ff/2 -> + attention -> + conv -> + ff/2 -> layer norm.
template <typename Scalar>
class ConformerBlock {
 public:
  struct Cache {
    typename FeedForward<Scalar>::Cache ff1, ff2;
    typename SelfAttention<Scalar>::Cache attn;
    typename ConvModule<Scalar>::Cache conv;
    typename LayerNorm<Scalar>::Cache final_norm;
  };

  ConformerBlock() = default;
  explicit ConformerBlock(const BlockShape& s)
      : ff1(s.model_dim, s.feedforward_dim),
        attn(s.model_dim, s.num_heads),
        conv(s.model_dim, s.conv_kernel_size),
        ff2(s.model_dim, s.feedforward_dim),
        final_norm(s.model_dim) {}

  template <typename Rng>
  void init(Rng& rng) {
    ff1.init(rng);
    attn.init(rng);
    conv.init(rng);
    ff2.init(rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* c = nullptr) const {
    Matrix<Scalar> h = x + Scalar(0.5) * ff1.forward(x, c ? &c->ff1 : nullptr);
    h += attn.forward(h, c ? &c->attn : nullptr);
    h += conv.forward(h, c ? &c->conv : nullptr);
    h += Scalar(0.5) * ff2.forward(h, c ? &c->ff2 : nullptr);
    return final_norm.forward(h, c ? &c->final_norm : nullptr);
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const Cache& c) {
    Matrix<Scalar> d = final_norm.backward(dy, c.final_norm);
    d += ff2.backward(Scalar(0.5) * d, c.ff2);
    d += conv.backward(d, c.conv);
    d += attn.backward(d, c.attn);
    d += ff1.backward(Scalar(0.5) * d, c.ff1);
    return d;
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    ff1.visit(join_name(p, "ff1"), f);
    attn.visit(join_name(p, "attn"), f);
    conv.visit(join_name(p, "conv"), f);
    ff2.visit(join_name(p, "ff2"), f);
    final_norm.visit(join_name(p, "final_norm"), f);
  }

  FeedForward<Scalar> ff1;
  SelfAttention<Scalar> attn;
  ConvModule<Scalar> conv;
  FeedForward<Scalar> ff2;
  LayerNorm<Scalar> final_norm;
};

}  // namespace mpm::nn

#pragma once

#include <cmath>

#include "mpm/nn/parameter.hpp"

namespace mpm::nn {

template <typename Scalar>
Matrix<Scalar> sigmoid(const Matrix<Scalar>& x) {
  return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
}

/// x * sigmoid(x)
template <typename Scalar>
Matrix<Scalar> swish(const Matrix<Scalar>& x) {
  return (x.array() * sigmoid(x).array()).matrix();
}

template <typename Scalar>
Matrix<Scalar> swish_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& x) {
  const Matrix<Scalar> sm = sigmoid(x);
  const auto s = sm.array();
  return (dy.array() * (s + x.array() * s * (Scalar(1) - s))).matrix();
}

/// Row-wise softmax, numerically stabilised.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& x) {
  Matrix<Scalar> y = x;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const Scalar mx = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

/// y = x W + b with W stored in x out.
template <typename Scalar>
class Linear {
 public:
  struct Cache {
    Matrix<Scalar> input;
  };

  Linear() = default;
  Linear(int in, int out) : weight(in, out), bias(1, out) {}

  template <typename Rng>
  void init(Rng& rng) {
    fill_uniform(weight.value, 1.0 / std::sqrt(static_cast<double>(weight.value.rows())), rng);
    bias.value.setZero();
  }

  int in_dim() const { return static_cast<int>(weight.value.rows()); }
  int out_dim() const { return static_cast<int>(weight.value.cols()); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    if (cache) cache->input = x;
    Matrix<Scalar> y(x.rows(), out_dim());
    y.noalias() = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const Cache& cache) {
    weight.grad.noalias() += cache.input.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    Matrix<Scalar> dx(dy.rows(), in_dim());
    dx.noalias() = dy * weight.value.transpose();
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "weight"), weight);
    f(join_name(prefix, "bias"), bias);
  }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
};

/// Normalises each row over the feature dimension.
template <typename Scalar>
class LayerNorm {
 public:
  static constexpr double kEps = 1e-5;

  struct Cache {
    Matrix<Scalar> normalized;
    Vector<Scalar> inv_std;
  };

  LayerNorm() = default;
  explicit LayerNorm(int dim) : gain(1, dim), shift(1, dim) { gain.value.setOnes(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    const Eigen::Index n = x.cols();
    Matrix<Scalar> xhat(x.rows(), n);
    Vector<Scalar> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar mean = x.row(r).mean();
      const auto centered = x.row(r).array() - mean;
      const Scalar var = centered.square().sum() / static_cast<Scalar>(n);
      inv_std(r) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kEps));
      xhat.row(r) = centered * inv_std(r);
    }
    Matrix<Scalar> y = (xhat.array().rowwise() * gain.value.row(0).array()).matrix();
    y.rowwise() += shift.value.row(0);
    if (cache) {
      cache->normalized = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const Cache& cache) {
    const Matrix<Scalar>& xhat = cache.normalized;
    gain.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    shift.grad.row(0) += dy.colwise().sum();
    const Matrix<Scalar> dxhat = (dy.array().rowwise() * gain.value.row(0).array()).matrix();
    const auto n = static_cast<Scalar>(dy.cols());
    Matrix<Scalar> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const Scalar mean_d = dxhat.row(r).sum() / n;
      const Scalar mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
      dx.row(r) = cache.inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
    }
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "gain"), gain);
    f(join_name(prefix, "shift"), shift);
  }

  Parameter<Scalar> gain;
  Parameter<Scalar> shift;
};

/// Sinusoidal position table, rows = positions.
template <typename Scalar>
Matrix<Scalar> sinusoidal_positions(int length, int dim) {
  Matrix<Scalar> pe(length, dim);
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(t, i) = static_cast<Scalar>(i % 2 == 0 ? std::sin(t * rate) : std::cos(t * rate));
    }
  }
  return pe;
}

}  // namespace mpm::nn

#pragma once

#include <cmath>
#include <random>
#include <string>

#include "mpm/types.hpp"

namespace mpm::nn {

template <typename Scalar>
struct Parameter {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

template <typename Scalar, typename Rng>
void fill_uniform(Matrix<Scalar>& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar, typename Rng>
void fill_normal(Matrix<Scalar>& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
}

/// Visits every parameter of a module tree. Modules expose
/// `template <typename F> void visit(const std::string& prefix, F&& f)`.
template <typename Module, typename F>
void for_each_parameter(Module& m, F&& f) {
  m.visit("", f);
}

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace mpm::nn

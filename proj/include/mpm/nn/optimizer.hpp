#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mpm/nn/parameter.hpp"

namespace mpm::nn {

/// Linear warmup from 0 to peak over `warmup` steps, then linear decay to 0
/// at `total`. Steps are 0-based.
struct LinearSchedule {
  double peak = 1e-4;
  int warmup = 100;
  int total = 1000;

  double at(int step) const {
    if (warmup > 0 && step < warmup) return peak * static_cast<double>(step + 1) / warmup;
    const int decay = total - warmup;
    if (decay <= 0) return peak;
    const double frac = static_cast<double>(total - step) / decay;
    return peak * std::max(0.0, frac);
  }
};

/// Adam with decoupled weight decay. Parameters whose name ends in ".bias",
/// or that belong to a layer norm or embedding, are not decayed.
template <typename Scalar>
class AdamW {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  AdamW() = default;
  explicit AdamW(double wd) : weight_decay(wd) {}

  template <typename Module>
  void step(Module& module, double lr) {
    ++t_;
    std::size_t i = 0;
    const double bc1 = 1.0 - std::pow(beta1, t_);
    const double bc2 = 1.0 - std::pow(beta2, t_);
    for_each_parameter(module, [&](const std::string& name, Parameter<Scalar>& p) {
      if (i == state_.size()) {
        state_.push_back({Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()),
                          Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()), decays(name)});
      }
      State& s = state_[i++];
      s.m = Scalar(beta1) * s.m + Scalar(1 - beta1) * p.grad;
      s.v = Scalar(beta2) * s.v + Scalar(1 - beta2) * p.grad.cwiseAbs2();
      if (s.decay && weight_decay > 0) p.value *= Scalar(1 - lr * weight_decay);
      p.value.array() -= Scalar(lr / bc1) * s.m.array() / ((s.v.array() / Scalar(bc2)).sqrt() + Scalar(eps));
    });
  }

  int steps_taken() const { return t_; }

 private:
  struct State {
    Matrix<Scalar> m, v;
    bool decay = true;
  };

  static bool decays(const std::string& name) {
    auto ends_with = [&](const std::string& suffix) {
      return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return !(ends_with(".bias") || ends_with(".gain") || ends_with(".shift") ||
             name.find("embed") != std::string::npos);
  }

  int t_ = 0;
  std::vector<State> state_;
};

}  // namespace mpm::nn

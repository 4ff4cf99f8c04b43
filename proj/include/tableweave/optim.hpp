#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tableweave/autograd.hpp"

namespace tableweave {

/// Adam with decoupled weight decay. Moments are keyed by parameter name so
/// the optimizer survives reallocation of the model's parameter list.
class AdamW {
public:
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  explicit AdamW(double learning_rate, double decay = 0.01) : lr(learning_rate), weight_decay(decay) {}

  void step(const std::vector<Parameter*>& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
      auto& s = state_[p->name];
      if (s.m.size() != p->value.size()) {
        s.m = Matrix::Zero(p->value.rows(), p->value.cols());
        s.v = Matrix::Zero(p->value.rows(), p->value.cols());
      }
      if (p->decay && weight_decay != 0.0) p->value *= 1.0 - lr * weight_decay;
      s.m = beta1 * s.m + (1.0 - beta1) * p->grad;
      s.v = beta2 * s.v + (1.0 - beta2) * p->grad.cwiseProduct(p->grad);
      p->value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }

private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  std::map<std::string, Moments> state_;
  long t_ = 0;
};

}  // namespace tableweave

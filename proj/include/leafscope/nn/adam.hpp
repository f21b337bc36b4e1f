#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "leafscope/nn/layers.hpp"

namespace leafscope::nn {

// Adam with conventional defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  explicit Adam(Scalar lr, Scalar beta1 = 0.9, Scalar beta2 = 0.999,
                Scalar eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<std::pair<std::string, Param*>>& params) {
    ++t_;
    const Scalar bc1 = Scalar(1) - std::pow(beta1_, static_cast<Scalar>(t_));
    const Scalar bc2 = Scalar(1) - std::pow(beta2_, static_cast<Scalar>(t_));
    for (const auto& [name, p] : params) {
      if (!p->trainable) continue;
      auto& slot = state_[name];
      if (slot.m.size() != p->value.size()) {
        slot.m.assign(p->value.size(), Scalar(0));
        slot.v.assign(p->value.size(), Scalar(0));
      }
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const Scalar g = p->grad.data[i];
        slot.m[i] = beta1_ * slot.m[i] + (Scalar(1) - beta1_) * g;
        slot.v[i] = beta2_ * slot.v[i] + (Scalar(1) - beta2_) * g * g;
        const Scalar mhat = slot.m[i] / bc1;
        const Scalar vhat = slot.v[i] / bc2;
        p->value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  Scalar learning_rate() const { return lr_; }

 private:
  struct Slot {
    std::vector<Scalar> m, v;
  };
  Scalar lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Slot> state_;
};

}  // namespace leafscope::nn

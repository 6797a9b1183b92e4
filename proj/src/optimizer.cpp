#include "toatod/optimizer.hpp"

#include <cmath>

namespace toatod {

void Adam::step(const std::vector<ag::Parameter*>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (ag::Parameter* p : params) {
    auto [it, fresh] = state_.try_emplace(p);
    Moments& s = it->second;
    if (fresh) {
      s.m = ag::Mat::Zero(p->value.rows(), p->value.cols());
      s.v = ag::Mat::Zero(p->value.rows(), p->value.cols());
    }
    s.m = beta1_ * s.m + (1.0 - beta1_) * p->grad;
    s.v = beta2_ * s.v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= lr_ * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps_);
  }
}

}  // namespace toatod

#pragma once

#include <map>
#include <vector>

#include "toatod/autograd.hpp"

namespace toatod {

// Adam with bias correction. Moments are keyed by parameter address, so an
// optimizer must not outlive the model it was built for.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update to `params` from their accumulated grads.
  void step(const std::vector<ag::Parameter*>& params);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  struct Moments {
    ag::Mat m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<const ag::Parameter*, Moments> state_;
};

}  // namespace toatod

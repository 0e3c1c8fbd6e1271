#pragma once

#include <vector>

#include "deepofdm/tensorkit/tensor.hpp"

namespace deepofdm::tk {

template <typename T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();

  long steps() const { return t_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  const std::vector<Var<T>>& params() const { return params_; }

 private:
  std::vector<Var<T>> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
};

}  // namespace deepofdm::tk

#include "deepofdm/tensorkit/adam.hpp"

#include <cmath>

namespace deepofdm::tk {

template <typename T>
Adam<T>::Adam(std::vector<Var<T>> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.value().size(), 0.0);
    v_.emplace_back(p.value().size(), 0.0);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) {
    if (p.grad().size() != p.value().size()) p.grad() = Tensor<T>(p.shape());
    p.zero_grad();
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.requires_grad() || p.grad().size() != p.value().size()) continue;
    auto& m = m_[k];
    auto& v = v_[k];
    T* w = p.value().ptr();
    const T* g = p.grad().ptr();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
      v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
      w[i] = static_cast<T>(static_cast<double>(w[i]) - step * m[i] / (std::sqrt(v[i]) + eps_ * std::sqrt(c2)));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace deepofdm::tk

#include "cofirec/numerics/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace cofirec::numerics {

Adam::Adam(std::vector<Param*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  for (const Param* p : params_) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
      throw std::invalid_argument("Adam: gradient shape mismatch for " + p->name);
    }
    if (!p->grad.all_finite()) {
      throw std::runtime_error("Adam: non-finite gradient in " + p->name);
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i]->value.values();
    const auto g = params_[i]->grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= lr * (mhat / (std::sqrt(vhat) + config_.epsilon) + config_.weight_decay * w[j]);
    }
  }
}

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) {
    p->zero_grad();
  }
}

}  // namespace cofirec::numerics

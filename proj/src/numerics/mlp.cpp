#include "cofirec/numerics/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "cofirec/numerics/kernels.hpp"

namespace cofirec::numerics {

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& dims, Activation hidden,
         Activation output) {
  if (dims.size() < 2) {
    throw std::invalid_argument("Mlp " + name + ": need at least input and output dims");
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const std::string prefix = name + ".l" + std::to_string(l);
    layer.weight = Param(prefix + ".w", dims[l], dims[l + 1]);
    layer.bias = Param(prefix + ".b", 1, dims[l + 1]);
    layer.activation = (l + 2 == dims.size()) ? output : hidden;
    layers_.push_back(std::move(layer));
  }
}

void Mlp::init(std::mt19937_64& rng) {
  for (auto& layer : layers_) {
    const double fan_in = static_cast<double>(layer.weight.value.rows());
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : layer.weight.value.values()) {
      w = dist(rng);
    }
    layer.bias.value.set_zero();
  }
}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (h.cols() != layer.weight.value.rows()) {
      throw std::invalid_argument("Mlp::forward: layer " + std::to_string(l) + " expects " +
                                  std::to_string(layer.weight.value.rows()) + " inputs, got " +
                                  std::to_string(h.cols()));
    }
    Matrix z;
    kernels::gemm(h, layer.weight.value, z);
    const auto bias = layer.bias.value.row(0);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto zr = z.row(r);
      for (std::size_t c = 0; c < zr.size(); ++c) {
        zr[c] += bias[c];
      }
    }
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
      cache->pre_activations.push_back(z);
    }
    if (layer.activation == Activation::relu) {
      for (double& v : z.values()) {
        v = v > 0.0 ? v : 0.0;
      }
    }
    h = std::move(z);
  }
  return h;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& dy) {
  if (cache.inputs.size() != layers_.size()) {
    throw std::invalid_argument("Mlp::backward: cache does not match this network");
  }
  Matrix grad = dy;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    auto& layer = layers_[li];
    const Matrix& z = cache.pre_activations[li];
    if (grad.rows() != z.rows() || grad.cols() != z.cols()) {
      throw std::invalid_argument("Mlp::backward: layer " + std::to_string(li) + " gradient shape " +
                                  shape_string(grad) + " != " + shape_string(z));
    }
    if (layer.activation == Activation::relu) {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(z.values()[i] > 0.0)) {
          grad.values()[i] = 0.0;
        }
      }
    }
    kernels::gemm_tn(cache.inputs[li], grad, layer.weight.grad, true);
    auto db = layer.bias.grad.row(0);
    for (std::size_t r = 0; r < grad.rows(); ++r) {
      const auto gr = grad.row(r);
      for (std::size_t c = 0; c < gr.size(); ++c) {
        db[c] += gr[c];
      }
    }
    Matrix dx;
    kernels::gemm_nt(grad, layer.weight.value, dx);
    grad = std::move(dx);
  }
  return grad;
}

std::vector<Param*> Mlp::parameters() {
  std::vector<Param*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Param*> Mlp::parameters() const {
  std::vector<const Param*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::size_t Mlp::in_dim() const { return layers_.empty() ? 0 : layers_.front().weight.value.rows(); }

std::size_t Mlp::out_dim() const { return layers_.empty() ? 0 : layers_.back().weight.value.cols(); }

}  // namespace cofirec::numerics

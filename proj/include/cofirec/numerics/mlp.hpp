#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "cofirec/numerics/matrix.hpp"

namespace cofirec::numerics {

enum class Activation { relu, identity };

struct DenseLayer {
  Param weight;  // in x out
  Param bias;    // 1 x out
  Activation activation = Activation::identity;
};

struct MlpCache {
  std::vector<Matrix> inputs;           // input to each layer
  std::vector<Matrix> pre_activations;  // x W + b for each layer
};

// Feed-forward stack of affine maps. Hidden layers use `hidden`, the last
// layer uses `output`. relu'(0) is taken as 0.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<std::size_t>& dims,
      Activation hidden = Activation::relu, Activation output = Activation::identity);

  // He-uniform weights, zero biases.
  void init(std::mt19937_64& rng);

  Matrix forward(const Matrix& x, MlpCache* cache = nullptr) const;
  // Accumulates parameter gradients and returns dL/dx.
  Matrix backward(const MlpCache& cache, const Matrix& dy);

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace cofirec::numerics

#pragma once

#include <span>
#include <vector>

#include "cofirec/numerics/matrix.hpp"

namespace cofirec::numerics {

inline constexpr double kLayerNormEps = 1e-9;

// y = x W + b, row-wise.
Matrix linear_forward(const Matrix& x, const Param& weight, const Param& bias);
// Accumulates dW, db and returns dx.
Matrix linear_backward(const Matrix& x, const Matrix& dy, Param& weight, Param& bias);

struct LayerNormCache {
  Matrix normalized;            // (x - mean) / sqrt(var + eps)
  std::vector<double> inv_std;  // per row
};

// Row-wise normalization followed by the gamma/beta affine map (both 1 x d).
Matrix layer_norm_forward(const Matrix& x, const Param& gamma, const Param& beta,
                          LayerNormCache* cache = nullptr);
Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& dy, Param& gamma,
                           Param& beta);

// Normalization without the affine part, exposed for the invariants tests.
Matrix normalize_rows(const Matrix& x, std::vector<double>* inv_std = nullptr);

void softmax_inplace(std::span<double> v);
void log_softmax_inplace(std::span<double> v);
Matrix softmax_rows(const Matrix& x);

}  // namespace cofirec::numerics

#include "cofirec/numerics/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cofirec/numerics/kernels.hpp"

namespace cofirec::numerics {

Matrix linear_forward(const Matrix& x, const Param& weight, const Param& bias) {
  Matrix y;
  kernels::gemm(x, weight.value, y);
  const auto b = bias.value.row(0);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    for (std::size_t c = 0; c < yr.size(); ++c) {
      yr[c] += b[c];
    }
  }
  return y;
}

Matrix linear_backward(const Matrix& x, const Matrix& dy, Param& weight, Param& bias) {
  kernels::gemm_tn(x, dy, weight.grad, true);
  auto db = bias.grad.row(0);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    const auto g = dy.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) {
      db[c] += g[c];
    }
  }
  Matrix dx;
  kernels::gemm_nt(dy, weight.value, dx);
  return dx;
}

Matrix normalize_rows(const Matrix& x, std::vector<double>* inv_std) {
  Matrix out(x.rows(), x.cols());
  if (inv_std != nullptr) {
    inv_std->assign(x.rows(), 0.0);
  }
  const double d = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) {
      mean += v;
    }
    mean /= d;
    double var = 0.0;
    for (double v : xr) {
      var += (v - mean) * (v - mean);
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    auto o = out.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) {
      o[c] = (xr[c] - mean) * is;
    }
    if (inv_std != nullptr) {
      (*inv_std)[r] = is;
    }
  }
  return out;
}

Matrix layer_norm_forward(const Matrix& x, const Param& gamma, const Param& beta,
                          LayerNormCache* cache) {
  if (gamma.value.cols() != x.cols() || beta.value.cols() != x.cols()) {
    throw std::invalid_argument("layer_norm_forward: width " + std::to_string(x.cols()) +
                                " does not match gamma/beta");
  }
  std::vector<double> inv_std;
  Matrix xhat = normalize_rows(x, &inv_std);
  Matrix y(x.rows(), x.cols());
  const auto g = gamma.value.row(0);
  const auto b = beta.value.row(0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto h = xhat.row(r);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < h.size(); ++c) {
      yr[c] = h[c] * g[c] + b[c];
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& dy, Param& gamma,
                           Param& beta) {
  const Matrix& xhat = cache.normalized;
  const std::size_t d = xhat.cols();
  Matrix dx(xhat.rows(), d);
  const auto g = gamma.value.row(0);
  auto dg = gamma.grad.row(0);
  auto db = beta.grad.row(0);
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    const auto h = xhat.row(r);
    const auto dyr = dy.row(r);
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dg[c] += dyr[c] * h[c];
      db[c] += dyr[c];
      dxhat[c] = dyr[c] * g[c];
      sum_dxhat += dxhat[c];
      sum_dxhat_xhat += dxhat[c] * h[c];
    }
    const double inv_d = 1.0 / static_cast<double>(d);
    auto out = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = cache.inv_std[r] * (dxhat[c] - inv_d * sum_dxhat - h[c] * inv_d * sum_dxhat_xhat);
    }
  }
  return dx;
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) {
    return;
  }
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : v) {
    x /= s;
  }
}

void log_softmax_inplace(std::span<double> v) {
  if (v.empty()) {
    return;
  }
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) {
    s += std::exp(x - m);
  }
  const double lse = m + std::log(s);
  for (double& x : v) {
    x -= lse;
  }
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    softmax_inplace(out.row(r));
  }
  return out;
}

}  // namespace cofirec::numerics

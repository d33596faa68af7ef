#include "cofirec/numerics/kernels.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace cofirec::numerics::kernels {
namespace {

void check_shapes(const char* op, std::size_t inner_a, std::size_t inner_b) {
  if (inner_a != inner_b) {
    throw std::invalid_argument(std::string(op) + ": inner dimension " + std::to_string(inner_a) +
                                " != " + std::to_string(inner_b));
  }
}

void prepare_output(Matrix& c, std::size_t rows, std::size_t cols, bool accumulate) {
  if (accumulate) {
    if (c.rows() != rows || c.cols() != cols) {
      throw std::invalid_argument("accumulate into " + shape_string(c) + ", expected " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
    }
  } else if (c.rows() != rows || c.cols() != cols) {
    c.resize(rows, cols);
  } else {
    c.set_zero();
  }
}

}  // namespace

void gemm(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes("gemm", a.cols(), b.rows());
  prepare_output(c, a.rows(), b.cols(), accumulate);
  const long n = static_cast<long>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t p = b.cols();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    double* crow = c.data() + static_cast<std::size_t>(i) * p;
    const double* arow = a.data() + static_cast<std::size_t>(i) * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) {
        continue;
      }
      const double* brow = b.data() + k * p;
      for (std::size_t j = 0; j < p; ++j) {
        crow[j] += aik * brow[j];
      }
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes("gemm_tn", a.rows(), b.rows());
  prepare_output(c, a.cols(), b.cols(), accumulate);
  const long m = static_cast<long>(a.cols());
  const std::size_t n = a.rows();
  const std::size_t p = b.cols();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) {
    double* crow = c.data() + static_cast<std::size_t>(i) * p;
    for (std::size_t r = 0; r < n; ++r) {
      const double ari = a(r, static_cast<std::size_t>(i));
      if (ari == 0.0) {
        continue;
      }
      const double* brow = b.data() + r * p;
      for (std::size_t j = 0; j < p; ++j) {
        crow[j] += ari * brow[j];
      }
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes("gemm_nt", a.cols(), b.cols());
  prepare_output(c, a.rows(), b.rows(), accumulate);
  const long n = static_cast<long>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t p = b.rows();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const double* arow = a.data() + static_cast<std::size_t>(i) * inner;
    double* crow = c.data() + static_cast<std::size_t>(i) * p;
    for (std::size_t j = 0; j < p; ++j) {
      const double* brow = b.data() + j * inner;
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) {
        s += arow[k] * brow[k];
      }
      crow[j] += s;
    }
  }
}

void nearest_rows(const Matrix& points, const Matrix& codes, std::span<int> index,
                  std::span<double> dist2) {
  check_shapes("nearest_rows", points.cols(), codes.cols());
  if (index.size() != points.rows() || dist2.size() != points.rows()) {
    throw std::invalid_argument("nearest_rows: output spans must have one entry per point");
  }
  if (codes.rows() == 0) {
    throw std::invalid_argument("nearest_rows: empty codebook");
  }
  const long n = static_cast<long>(points.rows());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto p = points.row(static_cast<std::size_t>(i));
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < codes.rows(); ++j) {
      const double d = squared_distance(p, codes.row(j));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    index[static_cast<std::size_t>(i)] = best;
    dist2[static_cast<std::size_t>(i)] = best_d;
  }
}

namespace serial {

void gemm(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes("gemm", a.cols(), b.rows());
  prepare_output(c, a.rows(), b.cols(), accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        s += a(i, k) * b(k, j);
      }
      c(i, j) += s;
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes("gemm_tn", a.rows(), b.rows());
  prepare_output(c, a.cols(), b.cols(), accumulate);
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) {
        s += a(r, i) * b(r, j);
      }
      c(i, j) += s;
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_shapes("gemm_nt", a.cols(), b.cols());
  prepare_output(c, a.rows(), b.rows(), accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        s += a(i, k) * b(j, k);
      }
      c(i, j) += s;
    }
  }
}

void nearest_rows(const Matrix& points, const Matrix& codes, std::span<int> index,
                  std::span<double> dist2) {
  check_shapes("nearest_rows", points.cols(), codes.cols());
  if (index.size() != points.rows() || dist2.size() != points.rows()) {
    throw std::invalid_argument("nearest_rows: output spans must have one entry per point");
  }
  for (std::size_t i = 0; i < points.rows(); ++i) {
    int best = -1;
    double best_d = 0.0;
    for (std::size_t j = 0; j < codes.rows(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < points.cols(); ++k) {
        const double diff = points(i, k) - codes(j, k);
        d += diff * diff;
      }
      if (best < 0 || d < best_d) {
        best = static_cast<int>(j);
        best_d = d;
      }
    }
    index[i] = best;
    dist2[i] = best_d;
  }
}

}  // namespace serial
}  // namespace cofirec::numerics::kernels

namespace cofirec::numerics {

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c;
  kernels::gemm(a, b, c);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c;
  kernels::gemm_tn(a, b, c);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c;
  kernels::gemm_nt(a, b, c);
  return c;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    d += diff * diff;
  }
  return d;
}

}  // namespace cofirec::numerics

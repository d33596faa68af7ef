#pragma once

#include <cstddef>
#include <span>

#include "cofirec/numerics/matrix.hpp"

// Dense kernels. The default versions parallelize over output rows with
// OpenMP; every output element is accumulated in a fixed order, so results
// are bit-identical for any thread count. `serial::` holds the plain
// reference loops the tests and benchmarks compare against.
namespace cofirec::numerics::kernels {

// c = a * b (or c += a * b when accumulate).
void gemm(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// c = a^T * b
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// c = a * b^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

// For every row of `points`, the index of the nearest row of `codes` under
// squared Euclidean distance. Ties go to the smallest index.
void nearest_rows(const Matrix& points, const Matrix& codes, std::span<int> index,
                  std::span<double> dist2);

namespace serial {
void gemm(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void nearest_rows(const Matrix& points, const Matrix& codes, std::span<int> index,
                  std::span<double> dist2);
}  // namespace serial

}  // namespace cofirec::numerics::kernels

namespace cofirec::numerics {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Squared distance between two equally sized vectors.
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace cofirec::numerics

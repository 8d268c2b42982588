#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wsikit::linalg {

/// Eigen-decomposition of a dense symmetric matrix (row-major n x n).
struct SymmetricEigen {
  std::vector<double> values;                 // descending
  std::vector<std::vector<double>> vectors;   // vectors[i] pairs with values[i], unit length
};

/// Cyclic Jacobi rotations. Eigenpairs are returned by descending eigenvalue
/// (equal eigenvalues keep ascending-index order) and every eigenvector is
/// sign-fixed so its first non-negligible component is positive.
SymmetricEigen symmetric_eigen(std::span<const double> matrix, std::size_t n);

/// Percentile with linear interpolation between order statistics, p in [0, 100].
/// Takes its input by value because it is partially sorted.
double percentile(std::vector<double> values, double p);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace wsikit::linalg

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "byzef/errors.hpp"

namespace byzef {

/// Dense d-dimensional parameter / gradient vector.
using DenseVector = std::vector<double>;

inline void require_same_dim(std::size_t a, std::size_t b, const char* where) {
  if (a != b) {
    throw ArgumentError(std::string(where) + ": dimension mismatch (" + std::to_string(a) +
                        " vs " + std::to_string(b) + ")");
  }
}

double dot(std::span<const double> a, std::span<const double> b);
double norm_sq(std::span<const double> a);
double dist_sq(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

DenseVector subtract(std::span<const double> a, std::span<const double> b);

/// Mean of scalars computed as first + sum(x_i - first) / m, which returns
/// the common value exactly when every input is identical.
double stable_mean(std::span<const double> values);

/// Coordinate-wise mean of a set of vectors (exact for identical inputs).
DenseVector mean_of(std::span<const DenseVector> vectors);

}  // namespace byzef

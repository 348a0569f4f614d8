#include "byzef/vector_ops.hpp"

namespace byzef {

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double norm_sq(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double dist_sq(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dist_sq");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_dim(x.size(), y.size(), "axpy");
  for (std::size_t j = 0; j < x.size(); ++j) y[j] += alpha * x[j];
}

DenseVector subtract(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "subtract");
  DenseVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

double stable_mean(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("stable_mean: empty input");
  const double first = values[0];
  double s = 0.0;
  for (double v : values) s += v - first;
  return first + s / static_cast<double>(values.size());
}

DenseVector mean_of(std::span<const DenseVector> vectors) {
  if (vectors.empty()) throw ArgumentError("mean_of: empty input");
  const std::size_t d = vectors[0].size();
  DenseVector acc(d, 0.0);
  for (const auto& v : vectors) {
    require_same_dim(d, v.size(), "mean_of");
    for (std::size_t j = 0; j < d; ++j) acc[j] += v[j] - vectors[0][j];
  }
  const double inv = 1.0 / static_cast<double>(vectors.size());
  for (std::size_t j = 0; j < d; ++j) acc[j] = vectors[0][j] + acc[j] * inv;
  return acc;
}

}  // namespace byzef

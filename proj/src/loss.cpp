#include "byzef/loss.hpp"

#include <algorithm>
#include <cmath>

namespace byzef {

namespace {

double sparse_dot(const SparseDelta& a, std::span<const double> x) {
  double s = 0.0;
  for (const auto& e : a.entries) s += e.value * x[e.index];
  return s;
}

void check_example(const Example& ex, std::size_t d) {
  require_same_dim(d, ex.features.dim, "logistic oracle");
}

template <typename Range, typename Get>
double loss_impl(std::span<const double> x, const Range& batch, Get get, double lambda) {
  if (batch.empty()) throw ArgumentError("logistic_loss: empty batch");
  double s = 0.0;
  for (const auto& item : batch) {
    const Example& ex = get(item);
    check_example(ex, x.size());
    s += softplus(-static_cast<double>(ex.label) * sparse_dot(ex.features, x));
  }
  return s / static_cast<double>(batch.size()) + lambda * norm_sq(x);
}

template <typename Range, typename Get>
DenseVector grad_impl(std::span<const double> x, const Range& batch, Get get, double lambda,
                      bool flip) {
  if (batch.empty()) throw ArgumentError("logistic_grad: empty batch");
  DenseVector g(x.size(), 0.0);
  for (const auto& item : batch) {
    const Example& ex = get(item);
    check_example(ex, x.size());
    const double b = flip ? -static_cast<double>(ex.label) : static_cast<double>(ex.label);
    const double coef = -b * sigmoid(-b * sparse_dot(ex.features, x));
    for (const auto& e : ex.features.entries) g[e.index] += coef * e.value;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = g[j] * inv + 2.0 * lambda * x[j];
  return g;
}

const Example& by_ref(const Example& e) { return e; }
const Example& by_ptr(const Example* e) { return *e; }

}  // namespace

double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logistic_loss(std::span<const double> x, std::span<const Example> batch, double lambda) {
  return loss_impl(x, batch, by_ref, lambda);
}

double logistic_loss(std::span<const double> x, const Batch& batch, double lambda) {
  return loss_impl(x, batch, by_ptr, lambda);
}

DenseVector logistic_grad(std::span<const double> x, std::span<const Example> batch, double lambda,
                          bool flip_labels) {
  return grad_impl(x, batch, by_ref, lambda, flip_labels);
}

DenseVector logistic_grad(std::span<const double> x, const Batch& batch, double lambda,
                          bool flip_labels) {
  return grad_impl(x, batch, by_ptr, lambda, flip_labels);
}

double logistic_smoothness_bound(std::span<const Example> examples, double lambda) {
  double max_sq = 0.0;
  for (const auto& ex : examples) {
    double s = 0.0;
    for (const auto& e : ex.features.entries) s += e.value * e.value;
    max_sq = std::max(max_sq, s);
  }
  return 0.25 * max_sq + 2.0 * lambda;
}

MinimizeResult minimize_strongly_convex(const std::function<DenseVector(const DenseVector&)>& grad,
                                        DenseVector x0, double smoothness, double strong_convexity,
                                        double tol, std::size_t max_iterations) {
  if (!(smoothness > 0.0)) throw ArgumentError("minimize: smoothness must be positive");
  const double step = 1.0 / smoothness;
  const double q = std::clamp(strong_convexity / smoothness, 0.0, 1.0);
  const double momentum = (1.0 - std::sqrt(q)) / (1.0 + std::sqrt(q));

  MinimizeResult res;
  DenseVector x = std::move(x0);
  DenseVector y = x;
  DenseVector x_prev = x;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const DenseVector gx = grad(x);
    res.grad_norm = std::sqrt(norm_sq(gx));
    res.iterations = it;
    if (res.grad_norm <= tol) {
      res.converged = true;
      break;
    }
    const DenseVector gy = grad(y);
    x_prev = x;
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = y[j] - step * gy[j];
    // Restart the momentum whenever it points uphill.
    double uphill = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) uphill += gy[j] * (x[j] - x_prev[j]);
    if (uphill > 0.0) {
      y = x;
    } else {
      for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] + momentum * (x[j] - x_prev[j]);
    }
  }
  res.x = std::move(x);
  return res;
}

}  // namespace byzef

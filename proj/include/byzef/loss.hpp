#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "byzef/dataset.hpp"
#include "byzef/vector_ops.hpp"

namespace byzef {

/// l2-regularized logistic loss: mean_i log(1 + exp(-b_i <a_i, x>)) + lambda ||x||^2.
struct LossSpec {
  double lambda = 0.0;
  std::size_t dim = 0;
};

/// Numerically stable log(1 + exp(t)).
double softplus(double t);
double sigmoid(double t);

double logistic_loss(std::span<const double> x, std::span<const Example> batch, double lambda);
double logistic_loss(std::span<const double> x, const Batch& batch, double lambda);

/// Mean of -b * sigmoid(-b <a, x>) * a over the batch, plus 2 lambda x.
/// With flip_labels every b is replaced by -b first.
DenseVector logistic_grad(std::span<const double> x, std::span<const Example> batch, double lambda,
                          bool flip_labels = false);
DenseVector logistic_grad(std::span<const double> x, const Batch& batch, double lambda,
                          bool flip_labels = false);

/// Upper bound on the smoothness constant of the loss over `examples`:
/// max ||a||^2 / 4 + 2 lambda.
double logistic_smoothness_bound(std::span<const Example> examples, double lambda);

struct MinimizeResult {
  DenseVector x;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Accelerated gradient descent for an L-smooth, mu-strongly convex objective,
/// stopping once ||grad|| <= tol.
MinimizeResult minimize_strongly_convex(const std::function<DenseVector(const DenseVector&)>& grad,
                                        DenseVector x0, double smoothness, double strong_convexity,
                                        double tol, std::size_t max_iterations);

}  // namespace byzef

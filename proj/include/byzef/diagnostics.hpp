#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "byzef/compressors.hpp"
#include "byzef/dataset.hpp"
#include "byzef/vector_ops.hpp"

namespace byzef {

/// One honest worker's local objective: logistic loss over its shard with its
/// own regularization weight.
struct LocalObjective {
  const Shard* shard = nullptr;
  double lambda = 0.0;

  double loss(std::span<const double> x) const;
  DenseVector grad(std::span<const double> x) const;
};

/// Mean of the honest workers' full-shard gradients.
DenseVector honest_full_gradient(std::span<const double> x, std::span<const LocalObjective> honest);
double honest_loss(std::span<const double> x, std::span<const LocalObjective> honest);

/// (1/m) sum_i ||grad_i - mean_j grad_j||^2 over precomputed local gradients.
double heterogeneity_of(std::span<const DenseVector> local_grads);
double realized_heterogeneity(std::span<const double> x, std::span<const LocalObjective> honest);

struct Lemma2Result {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
  double compression_err_sum = 0.0;  // sum_i ||g_i - v_i||^2
  double momentum_dev_sum = 0.0;     // sum_i ||v_i - grad_i(x)||^2
  double heterogeneity = 0.0;
};

/// Robust-aggregation error bound, checked on one round's state:
///   ||g_agg - mean_H g_i||^2
///     <= 6 kappa (m-1)/m^2 * sum_H (||g_i - v_i||^2 + ||v_i - grad_i(x)||^2)
///      + 6 kappa (m-1)/m * heterogeneity(x)
/// with m honest workers. holds = lhs <= rhs * (1 + 1e-9).
Lemma2Result lemma2_check(std::span<const double> g_agg, std::span<const DenseVector> honest_shadows,
                          std::span<const DenseVector> honest_momenta,
                          std::span<const DenseVector> local_grads, double kappa);
Lemma2Result lemma2_check(std::span<const double> g_agg, std::span<const DenseVector> honest_shadows,
                          std::span<const DenseVector> honest_momenta, std::span<const double> x,
                          std::span<const LocalObjective> honest, double kappa);

struct TheoryParams {
  double L = 1.0;
  double L_tilde = 1.0;
  double kappa = 0.0;
  double alpha = 1.0;
  std::size_t n = 1;
  std::size_t f = 0;
  double eta = 1.0;
  // Only needed for the momentum suggestion.
  std::optional<double> sigma_sq;
  std::optional<double> delta0;
  std::optional<std::size_t> rounds;
};

struct TheoryResult {
  double gamma_max = 0.0;
  std::optional<double> eta_suggestion;
  double Delta = 0.0;
};

/// Step-size bound, momentum suggestion and variance coefficient of the
/// convergence theorem:
///   gamma_max = min{ alpha / (8 Lt sqrt(3(6k+1))), eta / (2 sqrt(3(6k Lt^2 + L^2))) }
///   Delta     = 24 eta^3 (6k+1)/alpha^2 + 6(6k+1) eta^2/alpha + 3 eta/(n-f) + 18 k eta
TheoryResult theorem1_params(const TheoryParams& p);

/// Momentum bound alone (min of the four expressions, capped at 1).
double theorem1_eta(const TheoryParams& p);
double theorem1_delta(double kappa, double alpha, double eta, std::size_t honest);

/// Lyapunov value
///   delta(x) + 6 gamma (4 eta^2 (1+eta)(1+6k) + 3 k alpha^2) / (eta alpha^2 m) sum ||M_i||^2
///            + 3 gamma / eta ||M~||^2
/// where delta(x) = L_H(x) - L_H*, M_i = v_i - grad_i(x), M~ = mean v_i - grad L_H(x).
/// Throws StateError when L_H(x) < L_H* - 1e-9 (stale optimum).
double lyapunov_value(std::span<const double> x, std::span<const DenseVector> honest_momenta,
                      std::span<const LocalObjective> honest, double L_H_star, double gamma,
                      double eta, double alpha, double kappa);

/// Sum of uplink_bits over one round's messages.
std::uint64_t account_round(std::span<const SparseDelta> deltas, int value_bits = kDefaultValueBits);

}  // namespace byzef

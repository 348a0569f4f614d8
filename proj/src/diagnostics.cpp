#include "byzef/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "byzef/loss.hpp"

namespace byzef {

double LocalObjective::loss(std::span<const double> x) const {
  return logistic_loss(x, std::span<const Example>(shard->examples), lambda);
}

DenseVector LocalObjective::grad(std::span<const double> x) const {
  return logistic_grad(x, std::span<const Example>(shard->examples), lambda);
}

namespace {

std::vector<DenseVector> local_gradients(std::span<const double> x,
                                         std::span<const LocalObjective> honest) {
  if (honest.empty()) throw ArgumentError("no honest workers");
  std::vector<DenseVector> grads;
  grads.reserve(honest.size());
  for (const auto& obj : honest) grads.push_back(obj.grad(x));
  return grads;
}

DenseVector plain_mean(std::span<const DenseVector> vs) {
  DenseVector m(vs[0].size(), 0.0);
  for (const auto& v : vs) axpy(1.0, v, m);
  const double inv = 1.0 / static_cast<double>(vs.size());
  for (auto& c : m) c *= inv;
  return m;
}

}  // namespace

DenseVector honest_full_gradient(std::span<const double> x, std::span<const LocalObjective> honest) {
  return plain_mean(local_gradients(x, honest));
}

double honest_loss(std::span<const double> x, std::span<const LocalObjective> honest) {
  if (honest.empty()) throw ArgumentError("no honest workers");
  double s = 0.0;
  for (const auto& obj : honest) s += obj.loss(x);
  return s / static_cast<double>(honest.size());
}

double heterogeneity_of(std::span<const DenseVector> local_grads) {
  if (local_grads.empty()) throw ArgumentError("heterogeneity: no workers");
  const DenseVector mean = plain_mean(local_grads);
  double s = 0.0;
  for (const auto& g : local_grads) s += dist_sq(g, mean);
  return s / static_cast<double>(local_grads.size());
}

double realized_heterogeneity(std::span<const double> x, std::span<const LocalObjective> honest) {
  return heterogeneity_of(local_gradients(x, honest));
}

Lemma2Result lemma2_check(std::span<const double> g_agg, std::span<const DenseVector> honest_shadows,
                          std::span<const DenseVector> honest_momenta,
                          std::span<const DenseVector> local_grads, double kappa) {
  const std::size_t m = honest_shadows.size();
  if (m == 0 || honest_momenta.size() != m || local_grads.size() != m) {
    throw ArgumentError("lemma2_check: honest shadows, momenta and gradients must align");
  }
  Lemma2Result r;
  r.lhs = dist_sq(g_agg, plain_mean(honest_shadows));
  for (std::size_t i = 0; i < m; ++i) {
    r.compression_err_sum += dist_sq(honest_shadows[i], honest_momenta[i]);
    r.momentum_dev_sum += dist_sq(honest_momenta[i], local_grads[i]);
  }
  r.heterogeneity = heterogeneity_of(local_grads);
  const double md = static_cast<double>(m);
  r.rhs = 6.0 * kappa * (md - 1.0) / (md * md) * (r.compression_err_sum + r.momentum_dev_sum) +
          6.0 * kappa * (md - 1.0) / md * r.heterogeneity;
  r.holds = r.lhs <= r.rhs * (1.0 + 1e-9);
  return r;
}

Lemma2Result lemma2_check(std::span<const double> g_agg, std::span<const DenseVector> honest_shadows,
                          std::span<const DenseVector> honest_momenta, std::span<const double> x,
                          std::span<const LocalObjective> honest, double kappa) {
  const auto grads = local_gradients(x, honest);
  return lemma2_check(g_agg, honest_shadows, honest_momenta, grads, kappa);
}

double theorem1_delta(double kappa, double alpha, double eta, std::size_t honest) {
  const double c = 6.0 * kappa + 1.0;
  return 24.0 * eta * eta * eta * c / (alpha * alpha) + 6.0 * c * eta * eta / alpha +
         3.0 * eta / static_cast<double>(honest) + 18.0 * kappa * eta;
}

double theorem1_eta(const TheoryParams& p) {
  if (!p.sigma_sq || !p.delta0 || !p.rounds) {
    throw ArgumentError("momentum suggestion needs sigma_sq, delta0 and rounds");
  }
  const double s2 = *p.sigma_sq;
  const double d0 = *p.delta0;
  const double T = static_cast<double>(*p.rounds);
  if (!(s2 >= 0.0) || !(d0 > 0.0) || !(T > 0.0)) {
    throw ArgumentError("momentum suggestion needs sigma_sq >= 0, delta0 > 0, rounds > 0");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double c = 1.0 + 6.0 * p.kappa;
  const double honest = static_cast<double>(p.n - p.f);
  auto term = [&](double num, double den, double power) {
    return den > 0.0 ? std::pow(num / den, power) : inf;
  };
  double eta = std::min({
      term(p.L * d0 * p.alpha * p.alpha, 24.0 * c * s2 * T, 0.25),
      term(p.L * d0 * p.alpha, 6.0 * c * s2 * T, 1.0 / 3.0),
      term(p.L * d0 * honest, 3.0 * s2 * T, 0.5),
      term(p.L * d0, 18.0 * p.kappa * s2 * T, 0.5),
  });
  return std::min(eta, 1.0);
}

TheoryResult theorem1_params(const TheoryParams& p) {
  if (!(p.L > 0.0) || !(p.L_tilde > 0.0)) throw ArgumentError("theory: L and L_tilde must be > 0");
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw ArgumentError("theory: alpha must lie in (0, 1]");
  if (!(p.kappa >= 0.0)) throw ArgumentError("theory: kappa must be >= 0");
  if (!(p.eta >= 0.0 && p.eta <= 1.0)) throw ArgumentError("theory: eta must lie in [0, 1]");
  if (p.f >= p.n) throw ArgumentError("theory: need n > f");

  TheoryResult r;
  const double k = p.kappa;
  const double first = p.alpha / (8.0 * p.L_tilde * std::sqrt(3.0 * (6.0 * k + 1.0)));
  const double second =
      p.eta / (2.0 * std::sqrt(3.0 * (6.0 * k * p.L_tilde * p.L_tilde + p.L * p.L)));
  r.gamma_max = std::min(first, second);
  r.Delta = theorem1_delta(k, p.alpha, p.eta, p.n - p.f);
  if (p.sigma_sq && p.delta0 && p.rounds) r.eta_suggestion = theorem1_eta(p);
  return r;
}

double lyapunov_value(std::span<const double> x, std::span<const DenseVector> honest_momenta,
                      std::span<const LocalObjective> honest, double L_H_star, double gamma,
                      double eta, double alpha, double kappa) {
  if (honest_momenta.size() != honest.size() || honest.empty()) {
    throw ArgumentError("lyapunov_value: one momentum per honest worker required");
  }
  if (!(eta > 0.0) || !(alpha > 0.0)) throw ArgumentError("lyapunov_value: eta, alpha must be > 0");
  const double delta = honest_loss(x, honest) - L_H_star;
  if (delta < -1e-9) {
    throw StateError("lyapunov_value: L_H(x) below the supplied optimum by " +
                     std::to_string(-delta) + "; L_H_star is stale");
  }
  const auto grads = local_gradients(x, honest);
  const double m = static_cast<double>(honest.size());
  double mom_sum = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) mom_sum += dist_sq(honest_momenta[i], grads[i]);
  const double mean_dev = dist_sq(plain_mean(honest_momenta), plain_mean(grads));

  const double coef_m = 6.0 * gamma *
                        (4.0 * eta * eta * (1.0 + eta) * (1.0 + 6.0 * kappa) +
                         3.0 * kappa * alpha * alpha) /
                        (eta * alpha * alpha * m);
  return delta + coef_m * mom_sum + 3.0 * gamma / eta * mean_dev;
}

std::uint64_t account_round(std::span<const SparseDelta> deltas, int value_bits) {
  std::uint64_t bits = 0;
  for (const auto& d : deltas) bits += uplink_bits(d, value_bits, d.dim);
  return bits;
}

}  // namespace byzef

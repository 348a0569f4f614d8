#include "byzef/adversary.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

namespace byzef {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None:
      return "none";
    case AttackKind::SF:
      return "sf";
    case AttackKind::LF:
      return "lf";
    case AttackKind::IPM:
      return "ipm";
    case AttackKind::ALIE:
      return "alie";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string& name) {
  if (name == "none") return AttackKind::None;
  if (name == "sf") return AttackKind::SF;
  if (name == "lf") return AttackKind::LF;
  if (name == "ipm") return AttackKind::IPM;
  if (name == "alie") return AttackKind::ALIE;
  throw ConfigError("unknown attack '" + name + "' (expected none|sf|lf|ipm|alie)");
}

void AttackSpec::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("attack epsilon must be > 0");
  if (z && !(*z > 0.0)) throw ConfigError("attack z must be > 0 (or auto)");
}

std::size_t RoundView::dim() const {
  if (honest_deltas.empty()) throw AttackError("round view holds no honest messages");
  return honest_deltas.front().dim;
}

SparseDelta attack_sf(const SparseDelta& own_honest_delta) {
  SparseDelta out = own_honest_delta;
  for (auto& e : out.entries) e.value = -e.value;
  return out;
}

SparseDelta attack_lf(WorkerState& state, std::span<const double> x_new) {
  state.flip_labels = true;
  return worker_round(state, x_new);
}

namespace {

std::vector<DenseVector> dense_honest(const RoundView& view) {
  const std::size_t d = view.dim();
  std::vector<DenseVector> out;
  out.reserve(view.honest_deltas.size());
  for (const auto& m : view.honest_deltas) {
    if (m.dim != d) throw ArgumentError("round view: honest messages differ in dimension");
    out.push_back(densify(m));
  }
  return out;
}

SparseDelta top_k_clamped(const DenseVector& v, std::size_t k) {
  return compress_topk(v, std::clamp<std::size_t>(k, 1, v.size()));
}

}  // namespace

DenseVector ipm_direction(const RoundView& view, double epsilon) {
  if (view.honest_deltas.empty()) throw AttackError("ipm: no honest messages");
  const auto honest = dense_honest(view);
  DenseVector out(honest[0].size(), 0.0);
  for (const auto& h : honest) axpy(1.0, h, out);
  const double scale = -epsilon / static_cast<double>(honest.size());
  for (auto& v : out) v *= scale;
  return out;
}

SparseDelta attack_ipm(const RoundView& view, double epsilon, std::size_t k) {
  return top_k_clamped(ipm_direction(view, epsilon), k);
}

DenseVector alie_direction(const RoundView& view, double z) {
  if (view.honest_deltas.size() < 2) throw AttackError("alie: needs at least two honest messages");
  const auto honest = dense_honest(view);
  const std::size_t d = honest[0].size();
  const double m = static_cast<double>(honest.size());
  DenseVector out(d);
  std::vector<double> column(honest.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < honest.size(); ++i) column[i] = honest[i][j];
    const double mu = stable_mean(column);
    double ss = 0.0;
    for (double c : column) ss += (c - mu) * (c - mu);
    out[j] = mu - z * std::sqrt(ss / m);
  }
  return out;
}

SparseDelta attack_alie(const RoundView& view, double z, std::size_t k) {
  return top_k_clamped(alie_direction(view, z), k);
}

double alie_auto_z(std::size_t n, std::size_t f) {
  if (2 * f >= n) throw ConfigError("alie: requires f < n/2");
  const double honest = static_cast<double>(n - f);
  const double s = std::floor(static_cast<double>(n) / 2.0 + 1.0) - static_cast<double>(f);
  const double p = (honest - s) / honest;
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("alie: automatic z undefined for n=" + std::to_string(n) +
                      ", f=" + std::to_string(f) + "; set z explicitly");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace byzef

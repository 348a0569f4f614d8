#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byzef/compressors.hpp"
#include "byzef/protocol.hpp"

namespace byzef {

enum class AttackKind { None, SF, LF, IPM, ALIE };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);

struct AttackSpec {
  AttackKind kind = AttackKind::None;
  // IPM scale.
  double epsilon = 0.1;
  // ALIE deviation multiplier; empty means derive it from (n, f).
  std::optional<double> z;
  // Top-k used by IPM/ALIE; 0 means "same k as the honest compressor".
  std::size_t k = 0;

  void validate() const;
};

/// What an omniscient adversary sees in one round: the honest workers'
/// messages, already computed, and nothing else.
struct RoundView {
  std::vector<SparseDelta> honest_deltas;
  std::vector<std::size_t> byz_ids;
  std::size_t round = 0;

  std::size_t dim() const;
};

/// Negates every value.
SparseDelta attack_sf(const SparseDelta& own_honest_delta);

/// The attacker's own pipeline run with all sampled labels negated.
SparseDelta attack_lf(WorkerState& state, std::span<const double> x_new);

/// Top-k of -epsilon * mean(honest deltas).
SparseDelta attack_ipm(const RoundView& view, double epsilon, std::size_t k);
DenseVector ipm_direction(const RoundView& view, double epsilon);

/// Top-k of mu - z * sigma, with coordinate-wise population mean and standard
/// deviation of the honest deltas.
SparseDelta attack_alie(const RoundView& view, double z, std::size_t k);
DenseVector alie_direction(const RoundView& view, double z);

/// z = Phi^-1((n - f - s) / (n - f)) with s = floor(n/2 + 1) - f.
double alie_auto_z(std::size_t n, std::size_t f);

}  // namespace byzef

#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "byzef/aggregators.hpp"
#include "byzef/compressors.hpp"
#include "byzef/dataset.hpp"
#include "byzef/rng.hpp"

namespace byzef {

/// batch_size value selecting the whole shard (deterministic gradient).
inline constexpr std::size_t kFullBatch = 0;

/// Per-worker state of the error-feedback momentum method.
///
/// `v` is the local Polyak momentum and `g` the error-feedback shadow that the
/// server mirrors. Both start at the first stochastic gradient. `rng` drives
/// batch sampling and Rand-k; the caller may replace it between rounds.
struct WorkerState {
  std::size_t id = 0;
  DenseVector v;
  DenseVector g;
  std::shared_ptr<const Shard> shard;
  double eta = 1.0;
  CompressorSpec compressor;
  RngStream rng;
  double lambda = 0.0;
  std::size_t batch_size = 1;
  // Label-flipping attackers evaluate gradients with every label negated.
  bool flip_labels = false;
  // Stochastic gradient drawn in the most recent round (diagnostic).
  DenseVector last_grad;

  std::size_t dim() const noexcept { return v.size(); }
};

struct WorkerOptions {
  double eta = 1.0;
  CompressorSpec compressor;
  double lambda = 0.0;
  std::size_t batch_size = 1;
  bool flip_labels = false;
};

/// v0 = g0 = one stochastic gradient at x0. Returns the state and g0, which is
/// sent to the server uncompressed.
std::pair<WorkerState, DenseVector> worker_init(std::size_t id, std::shared_ptr<const Shard> shard,
                                                std::span<const double> x0,
                                                const WorkerOptions& options, RngStream rng);

/// One round at the freshly broadcast model:
///   v <- (1 - eta) v + eta * grad(x_new, batch)
///   c <- compress(v - g)
///   g <- g + c
/// and returns c.
SparseDelta worker_round(WorkerState& state, std::span<const double> x_new);

/// Compressed-SGD baseline: compress(grad(x_new, batch)). Requires an unbiased
/// compressor and keeps no optimizer state between rounds.
SparseDelta brcsgd_worker_round(WorkerState& state, std::span<const double> x_new);

/// Stochastic gradient for one sampled batch (honours flip_labels).
DenseVector stochastic_grad(WorkerState& state, std::span<const double> x);

struct ServerState {
  DenseVector x;
  // Server copy of every worker's g, Byzantine ones included.
  std::vector<DenseVector> shadows;
  double gamma = 0.0;
  AggregatorSpec aggregator;
  std::size_t round = 0;
  // Output of the most recent aggregation (diagnostic).
  DenseVector last_aggregate;

  /// Zero shadows; the initial g_i arrive as the first round's deltas.
  static ServerState create(DenseVector x0, std::size_t n_workers, double gamma,
                            AggregatorSpec aggregator);
};

/// shadows[i] += deltas[i] for every worker, g = F(shadows), x -= gamma * g.
const DenseVector& server_round(ServerState& server, std::span<const SparseDelta> deltas);

/// Baseline server step: g = F(received messages), x -= gamma * g. Shadows
/// are left untouched.
const DenseVector& brcsgd_server_round(ServerState& server, std::span<const SparseDelta> messages);

}  // namespace byzef

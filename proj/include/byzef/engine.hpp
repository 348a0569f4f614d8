#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byzef/adversary.hpp"
#include "byzef/aggregators.hpp"
#include "byzef/compressors.hpp"
#include "byzef/dataset.hpp"
#include "byzef/diagnostics.hpp"
#include "byzef/protocol.hpp"

namespace byzef {

enum class Algorithm { ByzEF21SGDM, BRCSGD };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

enum class PartitionKind { Uniform, LabelSorted };

struct DataSource {
  // "synthetic" (Gaussian blobs, seeded by the run seed), "a9a_like"
  // (fixed a9a-shaped stand-in) or a LIBSVM file path.
  std::string path = "synthetic";
  std::size_t dim = 0;  // 0: infer from file
  bool normalize = false;
  PartitionKind partition = PartitionKind::Uniform;
  // Synthetic generator.
  std::size_t synthetic_examples = 400;
  std::size_t synthetic_dim = 10;
  double synthetic_separation = 2.0;
};

struct RunConfig {
  std::size_t n = 20;
  std::size_t f = 0;
  std::uint64_t seed = 1;
  std::size_t rounds = 100;
  // When set, rounds = epochs * ceil(mean shard size / batch_size).
  std::optional<double> epochs;
  std::optional<double> gamma;  // empty: AUTO via the theory calculator
  std::optional<double> eta;    // empty: AUTO (needs sigma_sq, delta0)
  std::size_t batch_size = 1;  // kFullBatch (0): whole shard every round
  CompressorSpec compressor;
  AggregatorSpec aggregator;
  AttackSpec attack;
  Algorithm algorithm = Algorithm::ByzEF21SGDM;
  std::size_t eval_every = 10;
  DataSource data;
  std::optional<double> lambda;  // empty: 1 / (local shard size), per worker
  int value_bits = kDefaultValueBits;
  // Byzantine workers' initial message: attack-generated, or zero.
  bool byz_init_attack = true;
  // kappa used by the per-round aggregation-error check; empty disables it.
  std::optional<double> kappa;
  std::optional<double> sigma_sq;
  std::optional<double> delta0;
  std::size_t threads = 1;
  std::string trace_path;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Byzantine workers occupy the last f ids.
inline bool is_byzantine(const RunConfig& c, std::size_t id) { return id >= c.n - c.f; }

struct RoundMetrics {
  std::size_t round = 0;
  double train_loss = 0.0;
  double grad_norm_sq = 0.0;
  double heterogeneity = 0.0;
  std::uint64_t uplink_bits = 0;  // cumulative since initialization
  double lemma2_lhs = std::numeric_limits<double>::quiet_NaN();
  double lemma2_rhs = std::numeric_limits<double>::quiet_NaN();
  double comp_err = std::numeric_limits<double>::quiet_NaN();
  double mom_dev = std::numeric_limits<double>::quiet_NaN();
  double mean_mom_dev = std::numeric_limits<double>::quiet_NaN();
};

enum class RunStatus { Completed, Diverged };

struct RunResult {
  DenseVector x;
  std::vector<RoundMetrics> metrics;
  RunStatus status = RunStatus::Completed;
  std::size_t rounds_completed = 0;
  std::uint64_t uplink_bits = 0;
  double gamma = 0.0;
  double eta = 0.0;
  std::size_t rounds = 0;
};

/// Read-only view handed to observers after each server step.
struct RoundContext {
  std::size_t round = 0;
  const ServerState& server;
  std::span<const WorkerState> workers;   // all n (Byzantine states may be unused)
  std::span<const SparseDelta> messages;  // what the server received this round
  std::span<const double> x_before;       // model the round's gradients were taken at
};

struct RunHooks {
  std::function<void(const RoundContext&)> on_round;
};

/// Everything a run needs besides the config: the per-worker data.
struct Problem {
  std::size_t dim = 0;
  std::vector<std::shared_ptr<const Shard>> shards;  // one per worker
  std::uint64_t data_hash = 0;
};

/// Loads or generates the dataset named by config.data (normalized if asked).
Dataset load_dataset(const RunConfig& config);
/// True when load_dataset's result does not depend on config.seed.
bool dataset_is_seed_independent(const DataSource& source);
/// Partitions `data` over config.n workers.
Problem make_problem(const RunConfig& config, const Dataset& data);
/// load_dataset followed by make_problem.
Problem load_problem(const RunConfig& config);
Problem problem_from_shards(std::vector<Shard> shards, std::size_t dim);

/// Resolved per-worker regularization weights.
std::vector<double> worker_lambdas(const RunConfig& config, const Problem& problem);

/// Smoothness estimates (L of the honest objective, root-mean-square L_i).
struct SmoothnessEstimate {
  double L = 0.0;
  double L_tilde = 0.0;
};
SmoothnessEstimate estimate_smoothness(const RunConfig& config, const Problem& problem);

RunResult run(const RunConfig& config, const RunHooks& hooks = {});
RunResult run(const RunConfig& config, const Problem& problem, const RunHooks& hooks = {});

/// Metrics CSV (fixed header, %.17g numbers, "nan" for unavailable columns).
std::string metrics_csv_header();
void write_metrics_csv(std::ostream& out, std::span<const RoundMetrics> metrics);

/// Per-round message trace: (u32 round, u32 worker) then the wire-form delta.
struct TraceRecord {
  std::uint32_t round = 0;
  std::uint32_t worker = 0;
  SparseDelta delta;
};
std::vector<TraceRecord> read_trace(std::istream& in);

}  // namespace byzef

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "byzef/config.hpp"
#include "byzef/engine.hpp"

namespace byzef {

/// One aggregator axis entry, written "rule" or "rule+nnm".
struct AggregatorChoice {
  AggregationRule rule = AggregationRule::Avg;
  bool nnm = false;

  std::string label() const;
  static AggregatorChoice parse(const std::string& label);
  bool operator==(const AggregatorChoice&) const = default;
};

/// Grid of runs: algorithms x aggregators x attacks x seeds x step sizes.
///
/// Matrix files use the run-config syntax plus list keys
///   algorithms, aggregators, attacks, seeds, gammas (comma separated),
/// per-algorithm overrides "<algorithm>.<key>=<value>", and "parallel=N"
/// (cells evaluated concurrently). All other keys set the base config.
struct ExperimentMatrix {
  RunConfig base;
  std::vector<Algorithm> algorithms{Algorithm::ByzEF21SGDM};
  std::vector<AggregatorChoice> aggregators;
  std::vector<AttackKind> attacks;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> gammas{0.1, 0.01, 0.001};
  std::map<Algorithm, Settings> overrides;
  std::size_t parallel = 1;

  /// Throws ConfigError for an empty axis or an invalid cell config.
  void validate() const;
  std::size_t cell_count() const;
};

ExperimentMatrix parse_matrix(const Settings& settings);
ExperimentMatrix load_matrix(const std::string& path);

struct CellKey {
  Algorithm algorithm = Algorithm::ByzEF21SGDM;
  AggregatorChoice aggregator;
  AttackKind attack = AttackKind::None;
  std::uint64_t seed = 0;
  double gamma = 0.0;
};

/// Effective config of one cell (base, then algorithm overrides, then axes).
RunConfig cell_config(const ExperimentMatrix& m, const CellKey& key);

/// File stem shared by a cell's CSV and manifest.
std::string cell_stem(const CellKey& key);

struct CellResult {
  CellKey key;
  std::string csv_path;  // relative to the output directory
  double final_loss = 0.0;
  bool completed = true;  // false: diverged
  bool reused = false;    // found complete on disk and skipped
};

/// Best step size per (algorithm, aggregator, attack): lowest mean final
/// train loss over seeds, a diverged seed counting as +inf.
struct BestGamma {
  Algorithm algorithm;
  AggregatorChoice aggregator;
  AttackKind attack;
  double gamma;
  double mean_final_loss;
};

struct MatrixReport {
  std::vector<CellResult> cells;  // axis order: algorithm, aggregator, attack, seed, gamma
  std::vector<BestGamma> best;
  std::size_t ran = 0;
  std::size_t skipped = 0;
};

/// Runs every missing cell into out_dir/cells, then writes out_dir/index.csv
/// and out_dir/best_gamma.csv. A cell counts as complete when its manifest
/// exists; CSV and manifest are written to temporaries and renamed, CSV
/// first, so an interrupted matrix resumes cleanly.
MatrixReport run_matrix(const ExperimentMatrix& m, const std::filesystem::path& out_dir,
                        const std::function<void(const CellResult&)>& progress = {});

std::string matrix_index_header();

/// Parses an index.csv written by run_matrix.
std::vector<CellResult> read_matrix_index(const std::filesystem::path& index_path);

/// Final train_loss (last row) of a metrics CSV.
double final_train_loss(const std::filesystem::path& csv_path);

}  // namespace byzef

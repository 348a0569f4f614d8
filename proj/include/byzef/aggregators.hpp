#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "byzef/rng.hpp"
#include "byzef/vector_ops.hpp"

namespace byzef {

enum class AggregationRule { Avg, CWMed, CWTM, RFA };

std::string to_string(AggregationRule rule);
AggregationRule aggregation_rule_from_string(const std::string& name);

struct AggregatorSpec {
  AggregationRule rule = AggregationRule::Avg;
  std::size_t f = 0;
  bool use_nnm = false;
  std::size_t rfa_iterations = 8;
  double rfa_smoothing = 1e-6;

  /// Throws ConfigError if the spec cannot be applied to n inputs.
  void validate(std::size_t n) const;
  /// Short label such as "cwtm+nnm".
  std::string label() const;
};

/// Aggregate n same-dimension vectors: optional NNM mixing, then the rule.
DenseVector aggregate(const AggregatorSpec& spec, std::span<const DenseVector> inputs);

DenseVector average(std::span<const DenseVector> inputs);

/// Coordinate-wise median; even counts use the midpoint of the two central
/// order statistics.
DenseVector cwmed(std::span<const DenseVector> inputs);

/// Coordinate-wise trimmed mean dropping the f largest and f smallest values.
DenseVector cwtm(std::span<const DenseVector> inputs, std::size_t f);

/// Smoothed Weiszfeld iterations for the geometric median, started at the
/// coordinate-wise mean. Weights are 1 / max(smoothing, ||g_i - z||).
DenseVector rfa(std::span<const DenseVector> inputs, std::size_t iterations, double smoothing);

/// Nearest-neighbour mixing: output i is the plain mean of the n - f inputs
/// closest to input i (itself included; distance ties go to the lower index).
std::vector<DenseVector> nnm_preaggregate(std::span<const DenseVector> inputs, std::size_t f);

/// Empirical (f, kappa)-robustness certificate over a batch of random input
/// sets and every subset of size n - f.
struct RobustnessCertificate {
  std::string rule;
  std::size_t n = 0;
  std::size_t f = 0;
  std::size_t d = 0;
  std::size_t trials = 0;
  // +infinity encodes UNBOUNDED.
  double kappa_hat = 0.0;
  // Largest finite ratio observed.
  double worst_subset_ratio = 0.0;
  // Subsets examined whose ratio exceeded kappa_hat (0 by construction).
  std::size_t violations = 0;
  std::size_t subsets_checked = 0;

  bool unbounded() const noexcept { return kappa_hat == std::numeric_limits<double>::infinity(); }

  static std::string csv_header();
  /// rule,n,f,d,trials,kappa_hat|inf,worst_subset_ratio
  std::string csv_row() const;
};

/// Ratio ||F - mean_S||^2 / ((1/|S|) sum_S ||g_i - mean_S||^2) for one subset.
/// Returns +infinity when the denominator is zero and the numerator is not.
double robustness_ratio(std::span<const DenseVector> inputs, std::span<const std::size_t> subset,
                        std::span<const double> aggregate_output);

/// Largest n for which exhaustive subset enumeration is allowed.
inline constexpr std::size_t kMaxCertifyWorkers = 20;

RobustnessCertificate certify_kappa(const AggregatorSpec& spec, std::size_t n, std::size_t f,
                                    std::size_t d, std::size_t trials, RngStream& rng);

/// Same as certify_kappa but over caller-supplied input sets.
RobustnessCertificate certify_kappa_on(const AggregatorSpec& spec,
                                       std::span<const std::vector<DenseVector>> input_sets,
                                       std::size_t f);

}  // namespace byzef

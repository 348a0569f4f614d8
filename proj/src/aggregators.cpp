#include "byzef/aggregators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

namespace byzef {

namespace {

std::size_t check_inputs(std::span<const DenseVector> inputs, const char* where) {
  if (inputs.empty()) throw ArgumentError(std::string(where) + ": no inputs");
  const std::size_t d = inputs[0].size();
  for (const auto& v : inputs) require_same_dim(d, v.size(), where);
  return d;
}

// Indices of `inputs` in lexicographic order of the vectors themselves. Any
// order-dependent reduction run over this sequence is permutation invariant.
std::vector<std::size_t> canonical_order(std::span<const DenseVector> inputs) {
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(inputs[a].begin(), inputs[a].end(), inputs[b].begin(),
                                        inputs[b].end());
  });
  return order;
}

DenseVector mean_over(std::span<const DenseVector> inputs, std::span<const std::size_t> which) {
  const std::size_t d = inputs[which[0]].size();
  const DenseVector& pivot = inputs[which[0]];
  DenseVector acc(d, 0.0);
  for (std::size_t i : which) {
    const DenseVector& v = inputs[i];
    for (std::size_t j = 0; j < d; ++j) acc[j] += v[j] - pivot[j];
  }
  const double inv = 1.0 / static_cast<double>(which.size());
  for (std::size_t j = 0; j < d; ++j) acc[j] = pivot[j] + acc[j] * inv;
  return acc;
}

}  // namespace

std::string to_string(AggregationRule rule) {
  switch (rule) {
    case AggregationRule::Avg:
      return "avg";
    case AggregationRule::CWMed:
      return "cwmed";
    case AggregationRule::CWTM:
      return "cwtm";
    case AggregationRule::RFA:
      return "rfa";
  }
  return "?";
}

AggregationRule aggregation_rule_from_string(const std::string& name) {
  if (name == "avg") return AggregationRule::Avg;
  if (name == "cwmed") return AggregationRule::CWMed;
  if (name == "cwtm") return AggregationRule::CWTM;
  if (name == "rfa") return AggregationRule::RFA;
  throw ConfigError("unknown aggregator '" + name + "' (expected avg|cwmed|cwtm|rfa)");
}

void AggregatorSpec::validate(std::size_t n) const {
  if (n == 0) throw ConfigError("aggregator: no inputs");
  if (rule == AggregationRule::CWTM && n <= 2 * f) {
    throw ConfigError("cwtm requires n > 2f (n=" + std::to_string(n) + ", f=" + std::to_string(f) +
                      ")");
  }
  if (use_nnm && n <= f) throw ConfigError("nnm requires n > f");
  if (rule == AggregationRule::RFA) {
    if (rfa_iterations < 1) throw ConfigError("rfa_iterations must be >= 1");
    if (!(rfa_smoothing > 0.0)) throw ConfigError("rfa_smoothing must be > 0");
  }
}

std::string AggregatorSpec::label() const {
  return to_string(rule) + (use_nnm ? "+nnm" : "");
}

DenseVector average(std::span<const DenseVector> inputs) {
  check_inputs(inputs, "average");
  const auto order = canonical_order(inputs);
  return mean_over(inputs, order);
}

DenseVector cwmed(std::span<const DenseVector> inputs) {
  const std::size_t d = check_inputs(inputs, "cwmed");
  const std::size_t n = inputs.size();
  DenseVector out(d);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = inputs[i][j];
    std::sort(column.begin(), column.end());
    if (n % 2 == 1) {
      out[j] = column[n / 2];
    } else {
      const double lo = column[n / 2 - 1];
      const double hi = column[n / 2];
      out[j] = lo + 0.5 * (hi - lo);
    }
  }
  return out;
}

DenseVector cwtm(std::span<const DenseVector> inputs, std::size_t f) {
  const std::size_t d = check_inputs(inputs, "cwtm");
  const std::size_t n = inputs.size();
  if (n <= 2 * f) {
    throw ConfigError("cwtm requires n > 2f (n=" + std::to_string(n) + ", f=" + std::to_string(f) +
                      ")");
  }
  DenseVector out(d);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = inputs[i][j];
    std::sort(column.begin(), column.end());
    out[j] = stable_mean(std::span<const double>(column).subspan(f, n - 2 * f));
  }
  return out;
}

DenseVector rfa(std::span<const DenseVector> inputs, std::size_t iterations, double smoothing) {
  const std::size_t d = check_inputs(inputs, "rfa");
  if (iterations < 1) throw ArgumentError("rfa: iterations must be >= 1");
  if (!(smoothing > 0.0)) throw ArgumentError("rfa: smoothing must be > 0");

  const auto order = canonical_order(inputs);
  const DenseVector& pivot = inputs[order[0]];
  DenseVector z = mean_over(inputs, order);
  std::vector<double> weights(inputs.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    double wsum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const double dist = std::sqrt(dist_sq(inputs[order[r]], z));
      weights[r] = 1.0 / std::max(smoothing, dist);
      wsum += weights[r];
    }
    DenseVector acc(d, 0.0);
    for (std::size_t r = 0; r < order.size(); ++r) {
      const DenseVector& g = inputs[order[r]];
      for (std::size_t j = 0; j < d; ++j) acc[j] += weights[r] * (g[j] - pivot[j]);
    }
    for (std::size_t j = 0; j < d; ++j) z[j] = pivot[j] + acc[j] / wsum;
  }
  return z;
}

std::vector<DenseVector> nnm_preaggregate(std::span<const DenseVector> inputs, std::size_t f) {
  check_inputs(inputs, "nnm_preaggregate");
  const std::size_t n = inputs.size();
  if (n <= f) throw ConfigError("nnm requires n > f");
  const std::size_t keep = n - f;

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      dist[a * n + b] = dist[b * n + a] = dist_sq(inputs[a], inputs[b]);
    }
  }

  // Rank of each input in canonical order, used to sum neighbours in an
  // order that does not depend on input positions.
  const auto canon = canonical_order(inputs);
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[canon[r]] = r;

  std::vector<DenseVector> out;
  out.reserve(n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const double* row = &dist[i * n];
    auto closer = [row](std::size_t a, std::size_t b) {
      return row[a] < row[b] || (row[a] == row[b] && a < b);
    };
    if (keep < n) {
      std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                       closer);
      idx.resize(keep);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
    out.push_back(mean_over(inputs, idx));
    idx.resize(n);
  }
  return out;
}

DenseVector aggregate(const AggregatorSpec& spec, std::span<const DenseVector> inputs) {
  check_inputs(inputs, "aggregate");
  spec.validate(inputs.size());

  std::vector<DenseVector> mixed;
  std::span<const DenseVector> src = inputs;
  if (spec.use_nnm) {
    mixed = nnm_preaggregate(inputs, spec.f);
    src = mixed;
  }
  switch (spec.rule) {
    case AggregationRule::Avg:
      return average(src);
    case AggregationRule::CWMed:
      return cwmed(src);
    case AggregationRule::CWTM:
      return cwtm(src, spec.f);
    case AggregationRule::RFA:
      return rfa(src, spec.rfa_iterations, spec.rfa_smoothing);
  }
  throw ArgumentError("aggregate: unknown rule");
}

// ---------------------------------------------------------------------------
// Robustness certification

namespace {

// Squared norms below this fraction of the input scale are treated as zero
// when deciding whether a subset is degenerate.
constexpr double kNumericalZero = 1e-12;

struct RatioParts {
  double numerator;
  double denominator;
};

RatioParts ratio_parts(std::span<const DenseVector> inputs, std::span<const std::size_t> subset,
                       std::span<const double> out) {
  const DenseVector mean_s = mean_over(inputs, subset);
  double var = 0.0;
  for (std::size_t i : subset) var += dist_sq(inputs[i], mean_s);
  var /= static_cast<double>(subset.size());
  return {dist_sq(out, mean_s), var};
}

double input_scale(std::span<const DenseVector> inputs) {
  double s = 0.0;
  for (const auto& v : inputs) s = std::max(s, norm_sq(v));
  return std::max(s, 1.0);
}

double ratio_from(const RatioParts& p, double scale) {
  const double zero = kNumericalZero * scale;
  if (p.numerator <= zero) return 0.0;
  if (p.denominator <= zero) return std::numeric_limits<double>::infinity();
  return p.numerator / p.denominator;
}

// Calls fn(subset) for each subset of {0..n-1} of size m, in lexicographic order.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t m, Fn&& fn) {
  std::vector<std::size_t> s(m);
  std::iota(s.begin(), s.end(), std::size_t{0});
  while (true) {
    fn(std::span<const std::size_t>(s));
    std::size_t i = m;
    while (i > 0 && s[i - 1] == n - m + (i - 1)) --i;
    if (i == 0) return;
    ++s[i - 1];
    for (std::size_t j = i; j < m; ++j) s[j] = s[j - 1] + 1;
  }
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// Random input sets: honest points plus f placed adversarially. The families
// rotate so every certificate sees Gaussian, clustered-outlier, inlier-mimicking
// and degenerate (identical honest points) configurations.
std::vector<DenseVector> draw_input_set(std::size_t trial, std::size_t n, std::size_t f,
                                        std::size_t d, RngStream& rng) {
  std::vector<DenseVector> g(n, DenseVector(d));
  const std::size_t honest = n - f;
  const double spread = std::pow(10.0, -1.0 + 2.0 * rng.uniform01());
  DenseVector center(d);
  for (auto& c : center) c = rng.normal();

  for (std::size_t i = 0; i < honest; ++i) {
    for (std::size_t j = 0; j < d; ++j) g[i][j] = center[j] + spread * rng.normal();
  }
  const std::size_t family = trial % 4;
  if (family == 0 || f == 0) {
    for (std::size_t i = honest; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) g[i][j] = center[j] + spread * rng.normal();
    }
  } else if (family == 1) {
    // Colluding cluster far from the honest mass.
    const double dist = spread * std::pow(10.0, 4.0 * rng.uniform01());
    DenseVector dir(d);
    for (auto& c : dir) c = rng.normal();
    const double nrm = std::sqrt(std::max(norm_sq(dir), 1e-300));
    for (std::size_t i = honest; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        g[i][j] = center[j] + dist * dir[j] / nrm + 1e-3 * spread * rng.normal();
      }
    }
  } else if (family == 2) {
    // Mean minus z standard deviations of the honest points.
    const DenseVector mu = mean_of(std::span<const DenseVector>(g.data(), honest));
    DenseVector sd(d, 0.0);
    for (std::size_t i = 0; i < honest; ++i) {
      for (std::size_t j = 0; j < d; ++j) sd[j] += (g[i][j] - mu[j]) * (g[i][j] - mu[j]);
    }
    const double z = 3.0 * rng.uniform01();
    for (std::size_t j = 0; j < d; ++j) sd[j] = std::sqrt(sd[j] / static_cast<double>(honest));
    for (std::size_t i = honest; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) g[i][j] = mu[j] - z * sd[j];
    }
  } else {
    // Degenerate: honest points identical, outliers anywhere.
    for (std::size_t i = 1; i < honest; ++i) g[i] = g[0];
    for (std::size_t i = honest; i < n; ++i) {
      const double scale = std::pow(10.0, 3.0 * rng.uniform01());
      for (std::size_t j = 0; j < d; ++j) g[i][j] = center[j] + scale * rng.normal();
    }
  }
  // Shuffle so honest points are not always the first n - f.
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(g[i], g[static_cast<std::size_t>(rng.uniform_below(i + 1))]);
  }
  return g;
}

RobustnessCertificate certify_impl(const AggregatorSpec& spec_in, std::size_t n, std::size_t f,
                                   std::size_t d, std::size_t trials,
                                   const std::function<std::vector<DenseVector>(std::size_t)>& draw) {
  AggregatorSpec spec = spec_in;
  spec.f = f;
  if (2 * f >= n) throw ConfigError("certify_kappa requires f < n/2");
  if (n > kMaxCertifyWorkers || binomial(n, f) * static_cast<double>(trials) > 5e8) {
    throw ConfigError("certify_kappa: subset enumeration infeasible for n=" + std::to_string(n) +
                      ", f=" + std::to_string(f));
  }
  if (trials < 1) throw ConfigError("certify_kappa: trials must be >= 1");
  spec.validate(n);

  RobustnessCertificate cert;
  cert.rule = spec.label();
  cert.n = n;
  cert.f = f;
  cert.d = d;
  cert.trials = trials;

  struct Checked {
    RatioParts parts;
    double scale;
  };
  std::vector<Checked> seen;
  double kappa = 0.0;
  double worst_finite = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::vector<DenseVector> g = draw(t);
    const DenseVector out = aggregate(spec, g);
    const double scale = input_scale(g);
    for_each_subset(n, n - f, [&](std::span<const std::size_t> s) {
      const RatioParts p = ratio_parts(g, s, out);
      const double r = ratio_from(p, scale);
      kappa = std::max(kappa, r);
      if (std::isfinite(r)) worst_finite = std::max(worst_finite, r);
      seen.push_back({p, scale});
    });
  }
  cert.kappa_hat = kappa;
  cert.worst_subset_ratio = worst_finite;
  cert.subsets_checked = seen.size();

  // Re-check every examined pair against the final certificate.
  for (const auto& c : seen) {
    const double zero = kNumericalZero * c.scale;
    bool ok;
    if (std::isinf(kappa) || c.parts.numerator <= zero) {
      ok = true;
    } else if (c.parts.denominator <= zero) {
      ok = false;
    } else {
      ok = c.parts.numerator <= kappa * c.parts.denominator * (1.0 + 1e-12);
    }
    if (!ok) ++cert.violations;
  }
  return cert;
}

}  // namespace

double robustness_ratio(std::span<const DenseVector> inputs, std::span<const std::size_t> subset,
                        std::span<const double> aggregate_output) {
  if (subset.empty()) throw ArgumentError("robustness_ratio: empty subset");
  return ratio_from(ratio_parts(inputs, subset, aggregate_output), input_scale(inputs));
}

std::string RobustnessCertificate::csv_header() {
  return "rule,n,f,d,trials,kappa_hat,worst_subset_ratio";
}

std::string RobustnessCertificate::csv_row() const {
  char buf[64];
  std::string row = rule + "," + std::to_string(n) + "," + std::to_string(f) + "," +
                    std::to_string(d) + "," + std::to_string(trials) + ",";
  if (unbounded()) {
    row += "inf";
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", kappa_hat);
    row += buf;
  }
  std::snprintf(buf, sizeof buf, ",%.17g", worst_subset_ratio);
  return row + buf;
}

RobustnessCertificate certify_kappa(const AggregatorSpec& spec, std::size_t n, std::size_t f,
                                    std::size_t d, std::size_t trials, RngStream& rng) {
  if (d < 1) throw ConfigError("certify_kappa: d must be >= 1");
  return certify_impl(spec, n, f, d, trials,
                      [&](std::size_t t) { return draw_input_set(t, n, f, d, rng); });
}

RobustnessCertificate certify_kappa_on(const AggregatorSpec& spec,
                                       std::span<const std::vector<DenseVector>> input_sets,
                                       std::size_t f) {
  if (input_sets.empty()) throw ConfigError("certify_kappa_on: no input sets");
  const std::size_t n = input_sets[0].size();
  const std::size_t d = n > 0 ? input_sets[0][0].size() : 0;
  for (const auto& s : input_sets) {
    if (s.size() != n) throw ArgumentError("certify_kappa_on: input sets differ in size");
  }
  return certify_impl(spec, n, f, d, input_sets.size(),
                      [&](std::size_t t) { return input_sets[t]; });
}

}  // namespace byzef

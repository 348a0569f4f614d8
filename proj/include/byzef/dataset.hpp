#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "byzef/compressors.hpp"
#include "byzef/rng.hpp"

namespace byzef {

/// One labelled data point. Features are stored sparse with 0-based indices.
struct Example {
  SparseDelta features;
  int label = 1;  // -1 or +1

  bool operator==(const Example&) const = default;
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<Example> examples;

  std::size_t size() const noexcept { return examples.size(); }
  /// FNV-1a over labels, indices and the bit patterns of the values.
  std::uint64_t content_hash() const;
};

/// The local dataset of one worker.
struct Shard {
  std::size_t owner = 0;
  std::vector<Example> examples;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

/// Parses LIBSVM text ("label idx:val idx:val ..." with 1-based, strictly
/// increasing indices). Labels "0" and "-1" map to -1, any other positive
/// value to +1. Blank lines and lines starting with '#' are skipped.
std::vector<Example> parse_libsvm(std::istream& in, std::size_t dim);

/// Loads a LIBSVM file. With dim == 0 the dimension is inferred as the
/// largest index present.
Dataset load_libsvm(const std::string& path, std::size_t dim = 0);

void write_libsvm(std::ostream& out, const Dataset& data);

/// Scales every feature row to unit Euclidean norm (zero rows unchanged).
void normalize_rows(Dataset& data);

/// Seeded shuffle, then contiguous split into n shards whose sizes differ by
/// at most one (earlier shards take the remainder).
std::vector<Shard> partition_uniform(const Dataset& data, std::size_t n, std::uint64_t seed);

/// Non-iid split: examples sorted by label (stable) and cut contiguously, so
/// shards see different label mixes. Sizes as in partition_uniform.
std::vector<Shard> partition_label_sorted(const Dataset& data, std::size_t n, std::uint64_t seed);

/// Pointers into a shard; valid while the shard lives.
using Batch = std::vector<const Example*>;

/// batch_size i.i.d. uniform draws with replacement.
Batch sample_batch(const Shard& shard, std::size_t batch_size, RngStream& rng);

/// Two Gaussian blobs with labels +1 / -1, plus the minimizer of the
/// l2-regularized logistic loss over the whole set.
struct SyntheticProblem {
  Dataset data;
  double lambda = 0.0;
  DenseVector x_star;
};

/// Blob means are +-(separation/2) along the all-ones direction; each
/// coordinate carries unit Gaussian noise. Labels alternate +1, -1.
Dataset make_blobs(std::size_t n_examples, std::size_t dim, double separation, std::uint64_t seed);

/// make_blobs plus the reference optimum, found by accelerated full-gradient
/// descent run to ||grad|| <= 1e-10.
SyntheticProblem make_synthetic(std::size_t n_examples, std::size_t dim, double separation,
                                std::uint64_t seed, double lambda);

/// Shape of the LIBSVM a9a set: 14 one-hot categorical groups covering
/// 123 binary features, so every row has exactly 14 ones.
inline constexpr std::size_t kA9aExamples = 32561;
inline constexpr std::size_t kA9aDim = 123;

/// Stand-in with a9a's shape: per-group category frequencies are skewed,
/// labels come from a planted logistic model (about a quarter positive).
/// The content depends only on `seed`.
Dataset make_a9a_like(std::size_t n_examples, std::uint64_t seed);

/// Writes x as whitespace-separated decimals (round-trip precision).
void write_vector(std::ostream& out, const DenseVector& x);
DenseVector read_vector(std::istream& in);

}  // namespace byzef

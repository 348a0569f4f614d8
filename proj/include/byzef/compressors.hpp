#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byzef/rng.hpp"
#include "byzef/vector_ops.hpp"

namespace byzef {

/// Compressed message: a sparse list of (index, value) pairs over [0, dim).
///
/// Canonical form: indices strictly increasing and no stored zeros. This is
/// the only object a worker sends to the server after initialization.
struct SparseDelta {
  struct Entry {
    std::uint32_t index = 0;
    double value = 0.0;
    bool operator==(const Entry&) const = default;
  };

  std::uint32_t dim = 0;
  std::vector<Entry> entries;

  bool operator==(const SparseDelta&) const = default;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }

  /// Throws ArgumentError if the canonical-form invariants are violated.
  void validate() const;

  /// Every nonzero coordinate of `z`, in index order.
  static SparseDelta from_dense(std::span<const double> z);
};

enum class CompressorKind { TopK, RandK, Identity };

struct CompressorSpec {
  CompressorKind kind = CompressorKind::TopK;
  std::size_t k = 1;
  // Declared contraction parameter. k/d for Top-k when left unset.
  std::optional<double> alpha;

  /// Contraction parameter used by the theory calculator for dimension d.
  double alpha_for(std::size_t d) const;
  bool unbiased() const noexcept { return kind != CompressorKind::TopK; }
};

std::string to_string(CompressorKind kind);
CompressorKind compressor_kind_from_string(const std::string& name);

/// Top-k by magnitude. Ties are broken toward the lower index.
SparseDelta compress_topk(std::span<const double> z, std::size_t k);

/// Rand-k: k distinct coordinates chosen uniformly (partial Fisher-Yates),
/// each scaled by d/k so the message is unbiased.
SparseDelta compress_randk(std::span<const double> z, std::size_t k, RngStream& rng);

/// Dispatch on `spec`. `rng` is only drawn from for Rand-k.
SparseDelta compress(const CompressorSpec& spec, std::span<const double> z, RngStream& rng);

/// base + delta (as a dense vector).
DenseVector decompress_add(DenseVector base, const SparseDelta& delta);

/// In-place variant of decompress_add.
void add_into(std::span<double> base, const SparseDelta& delta);

DenseVector densify(const SparseDelta& delta);

inline constexpr int kDefaultValueBits = 32;

/// Bits to transmit `delta`: each entry costs value_bits plus ceil(log2(dim))
/// index bits.
std::uint64_t uplink_bits(const SparseDelta& delta, int value_bits, std::size_t dim);

int index_bits(std::size_t dim);

// Little-endian wire form: u32 dim, u32 count, then count x (u32 index, f64 value).
void write_delta(std::ostream& out, const SparseDelta& delta);
SparseDelta read_delta(std::istream& in);

}  // namespace byzef

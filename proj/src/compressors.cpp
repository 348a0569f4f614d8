#include "byzef/compressors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

namespace byzef {

namespace {

void check_k(std::size_t k, std::size_t d, const char* where) {
  if (k < 1 || k > d) {
    throw ArgumentError(std::string(where) + ": k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(d) + "]");
  }
}

std::uint32_t checked_dim(std::size_t d) {
  if (d > UINT32_MAX) throw ArgumentError("dimension exceeds 32-bit index range");
  return static_cast<std::uint32_t>(d);
}

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw IoError("read_delta: truncated record");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

}  // namespace

void SparseDelta::validate() const {
  if (entries.size() > dim) throw ArgumentError("SparseDelta: more entries than dim");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].index >= dim) throw ArgumentError("SparseDelta: index out of range");
    if (entries[i].value == 0.0) throw ArgumentError("SparseDelta: explicit zero stored");
    if (i > 0 && entries[i].index <= entries[i - 1].index) {
      throw ArgumentError("SparseDelta: indices not strictly increasing");
    }
  }
}

SparseDelta SparseDelta::from_dense(std::span<const double> z) {
  SparseDelta out;
  out.dim = checked_dim(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] != 0.0) out.entries.push_back({static_cast<std::uint32_t>(j), z[j]});
  }
  return out;
}

double CompressorSpec::alpha_for(std::size_t d) const {
  if (alpha) return *alpha;
  switch (kind) {
    case CompressorKind::Identity:
      return 1.0;
    case CompressorKind::TopK:
    case CompressorKind::RandK:
      return static_cast<double>(std::min(k, d)) / static_cast<double>(d);
  }
  return 1.0;
}

std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::TopK:
      return "topk";
    case CompressorKind::RandK:
      return "randk";
    case CompressorKind::Identity:
      return "identity";
  }
  return "?";
}

CompressorKind compressor_kind_from_string(const std::string& name) {
  if (name == "topk") return CompressorKind::TopK;
  if (name == "randk") return CompressorKind::RandK;
  if (name == "identity") return CompressorKind::Identity;
  throw ConfigError("unknown compressor '" + name + "' (expected topk|randk|identity)");
}

SparseDelta compress_topk(std::span<const double> z, std::size_t k) {
  const std::size_t d = z.size();
  check_k(k, d, "compress_topk");
  SparseDelta out;
  out.dim = checked_dim(d);

  // Larger magnitude first, then lower index first.
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    const double ma = std::abs(z[a]);
    const double mb = std::abs(z[b]);
    return ma > mb || (ma == mb && a < b);
  };

  if (k == 1) {
    std::uint32_t best = 0;
    for (std::uint32_t j = 1; j < d; ++j) {
      if (before(j, best)) best = j;
    }
    if (z[best] != 0.0) out.entries.push_back({best, z[best]});
    return out;
  }

  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), 0u);
  if (k < d) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                     before);
    order.resize(k);
  }
  std::sort(order.begin(), order.end());
  for (std::uint32_t j : order) {
    if (z[j] != 0.0) out.entries.push_back({j, z[j]});
  }
  return out;
}

SparseDelta compress_randk(std::span<const double> z, std::size_t k, RngStream& rng) {
  const std::size_t d = z.size();
  check_k(k, d, "compress_randk");
  SparseDelta out;
  out.dim = checked_dim(d);
  const double scale = static_cast<double>(d) / static_cast<double>(k);

  std::vector<std::uint32_t> chosen;
  if (k == 1) {
    chosen.push_back(static_cast<std::uint32_t>(rng.uniform_below(d)));
  } else {
    std::vector<std::uint32_t> pool(d);
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(d - i));
      std::swap(pool[i], pool[j]);
    }
    chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());
  }
  for (std::uint32_t j : chosen) {
    const double v = scale * z[j];
    if (v != 0.0) out.entries.push_back({j, v});
  }
  return out;
}

SparseDelta compress(const CompressorSpec& spec, std::span<const double> z, RngStream& rng) {
  switch (spec.kind) {
    case CompressorKind::TopK:
      return compress_topk(z, spec.k);
    case CompressorKind::RandK:
      return compress_randk(z, spec.k, rng);
    case CompressorKind::Identity:
      return SparseDelta::from_dense(z);
  }
  throw ArgumentError("compress: unknown compressor kind");
}

void add_into(std::span<double> base, const SparseDelta& delta) {
  require_same_dim(base.size(), delta.dim, "decompress_add");
  for (const auto& e : delta.entries) {
    if (e.index >= base.size()) throw ArgumentError("decompress_add: index out of range");
    base[e.index] += e.value;
  }
}

DenseVector decompress_add(DenseVector base, const SparseDelta& delta) {
  add_into(base, delta);
  return base;
}

DenseVector densify(const SparseDelta& delta) {
  return decompress_add(DenseVector(delta.dim, 0.0), delta);
}

int index_bits(std::size_t dim) {
  if (dim <= 1) return 0;
  return static_cast<int>(std::bit_width(dim - 1));
}

std::uint64_t uplink_bits(const SparseDelta& delta, int value_bits, std::size_t dim) {
  if (value_bits <= 0) throw ArgumentError("uplink_bits: value_bits must be positive");
  return static_cast<std::uint64_t>(delta.entries.size()) *
         static_cast<std::uint64_t>(value_bits + index_bits(dim));
}

void write_delta(std::ostream& out, const SparseDelta& delta) {
  put_le<std::uint32_t>(out, delta.dim);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(delta.entries.size()));
  for (const auto& e : delta.entries) {
    put_le<std::uint32_t>(out, e.index);
    put_le<double>(out, e.value);
  }
  if (!out) throw IoError("write_delta: stream failure");
}

SparseDelta read_delta(std::istream& in) {
  SparseDelta delta;
  delta.dim = get_le<std::uint32_t>(in);
  const auto count = get_le<std::uint32_t>(in);
  if (count > delta.dim) throw IoError("read_delta: count exceeds dim");
  delta.entries.resize(count);
  for (auto& e : delta.entries) {
    e.index = get_le<std::uint32_t>(in);
    e.value = get_le<double>(in);
  }
  return delta;
}

}  // namespace byzef

#include "byzef/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "byzef/loss.hpp"

namespace byzef {

namespace {

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  // strtod accepts forms from_chars rejects (leading '+'); require a full match.
  std::string buf(s);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && std::isfinite(out);
}

bool parse_index(std::string_view s, std::uint64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::vector<Example> parse_impl(std::istream& in, std::size_t dim, bool infer_dim,
                                std::size_t& max_index) {
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok) || tok[0] == '#') continue;

    double label_value;
    if (!parse_double(tok, label_value)) throw ParseError(line_no, "bad label '" + tok + "'");
    Example ex;
    ex.label = label_value > 0.0 ? 1 : -1;
    if (label_value != 0.0 && label_value != -1.0 && label_value != 1.0) {
      throw ParseError(line_no, "label must be -1, 0 or +1, got '" + tok + "'");
    }

    std::uint64_t prev = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(line_no, "expected idx:val, got '" + tok + "'");
      std::uint64_t idx;
      double val;
      if (!parse_index(std::string_view(tok).substr(0, colon), idx) || idx == 0) {
        throw ParseError(line_no, "bad feature index in '" + tok + "'");
      }
      if (!parse_double(std::string_view(tok).substr(colon + 1), val)) {
        throw ParseError(line_no, "non-numeric value in '" + tok + "'");
      }
      if (idx <= prev) throw ParseError(line_no, "feature indices must be strictly increasing");
      prev = idx;
      if (!infer_dim && idx > dim) {
        throw ParseError(line_no, "feature index " + std::to_string(idx) + " exceeds dimension " +
                                      std::to_string(dim));
      }
      max_index = std::max<std::size_t>(max_index, idx);
      if (val != 0.0) ex.features.entries.push_back({static_cast<std::uint32_t>(idx - 1), val});
    }
    ex.features.dim = static_cast<std::uint32_t>(dim);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::size_t> split_sizes(std::size_t total, std::size_t n) {
  std::vector<std::size_t> sizes(n, total / n);
  for (std::size_t i = 0; i < total % n; ++i) ++sizes[i];
  return sizes;
}

std::vector<Shard> cut(const Dataset& data, const std::vector<std::size_t>& order, std::size_t n) {
  const auto sizes = split_sizes(order.size(), n);
  std::vector<Shard> shards(n);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < n; ++s) {
    shards[s].owner = s;
    shards[s].examples.reserve(sizes[s]);
    for (std::size_t i = 0; i < sizes[s]; ++i) shards[s].examples.push_back(data.examples[order[pos++]]);
  }
  return shards;
}

std::vector<std::size_t> shuffled_indices(std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng = RngStream::derive(seed, 0, 0, 0x5348554646ULL);
  for (std::size_t i = m; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_below(i))]);
  }
  return order;
}

void check_partition(const Dataset& data, std::size_t n) {
  if (n == 0) throw ConfigError("partition: n must be positive");
  if (n > data.size()) {
    throw ConfigError("partition: " + std::to_string(n) + " workers but only " +
                      std::to_string(data.size()) + " examples");
  }
}

}  // namespace

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(dim);
  feed(examples.size());
  for (const auto& ex : examples) {
    feed(static_cast<std::uint64_t>(static_cast<std::int64_t>(ex.label)));
    feed(ex.features.entries.size());
    for (const auto& e : ex.features.entries) {
      feed(e.index);
      feed(std::bit_cast<std::uint64_t>(e.value));
    }
  }
  return h;
}

std::vector<Example> parse_libsvm(std::istream& in, std::size_t dim) {
  if (dim == 0) throw ArgumentError("parse_libsvm: dimension must be positive");
  std::size_t max_index = 0;
  return parse_impl(in, dim, false, max_index);
}

Dataset load_libsvm(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  Dataset data;
  std::size_t max_index = 0;
  data.examples = parse_impl(in, dim, dim == 0, max_index);
  data.dim = dim == 0 ? max_index : dim;
  if (data.dim == 0) throw IoError("dataset '" + path + "' has no features");
  for (auto& ex : data.examples) ex.features.dim = static_cast<std::uint32_t>(data.dim);
  return data;
}

void write_libsvm(std::ostream& out, const Dataset& data) {
  char buf[64];
  for (const auto& ex : data.examples) {
    out << (ex.label > 0 ? "+1" : "-1");
    for (const auto& e : ex.features.entries) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", e.index + 1, e.value);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write_libsvm: stream failure");
}

void normalize_rows(Dataset& data) {
  for (auto& ex : data.examples) {
    double s = 0.0;
    for (const auto& e : ex.features.entries) s += e.value * e.value;
    if (s == 0.0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (auto& e : ex.features.entries) e.value *= inv;
  }
}

std::vector<Shard> partition_uniform(const Dataset& data, std::size_t n, std::uint64_t seed) {
  check_partition(data, n);
  return cut(data, shuffled_indices(data.size(), seed), n);
}

std::vector<Shard> partition_label_sorted(const Dataset& data, std::size_t n, std::uint64_t seed) {
  check_partition(data, n);
  auto order = shuffled_indices(data.size(), seed);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.examples[a].label < data.examples[b].label;
  });
  return cut(data, order, n);
}

Batch sample_batch(const Shard& shard, std::size_t batch_size, RngStream& rng) {
  if (batch_size < 1) throw ArgumentError("sample_batch: batch_size must be >= 1");
  if (shard.empty()) throw StateError("sample_batch: empty shard");
  Batch batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    batch.push_back(&shard.examples[static_cast<std::size_t>(rng.uniform_below(shard.size()))]);
  }
  return batch;
}

Dataset make_blobs(std::size_t n_examples, std::size_t dim, double separation, std::uint64_t seed) {
  if (dim < 1) throw ArgumentError("make_blobs: dim must be >= 1");
  Dataset data;
  data.dim = dim;
  data.examples.reserve(n_examples);
  RngStream rng = RngStream::derive(seed, 0, 0, 0x53594e5448ULL);
  const double offset = 0.5 * separation / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < n_examples; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    DenseVector a(dim);
    for (auto& v : a) v = label * offset + rng.normal();
    data.examples.push_back({SparseDelta::from_dense(a), label});
  }
  return data;
}

SyntheticProblem make_synthetic(std::size_t n_examples, std::size_t dim, double separation,
                                std::uint64_t seed, double lambda) {
  if (n_examples < 1) throw ArgumentError("make_synthetic: need at least one example");
  if (!(lambda > 0.0)) throw ArgumentError("make_synthetic: lambda must be positive");

  SyntheticProblem prob;
  prob.lambda = lambda;
  prob.data = make_blobs(n_examples, dim, separation, seed);
  const std::span<const Example> all(prob.data.examples);
  const double smooth = logistic_smoothness_bound(all, lambda);
  auto grad = [&](const DenseVector& x) { return logistic_grad(x, all, lambda); };
  auto res = minimize_strongly_convex(grad, DenseVector(dim, 0.0), smooth, 2.0 * lambda, 1e-10,
                                      2'000'000);
  if (!res.converged) {
    throw StateError("make_synthetic: reference optimum did not converge (|grad|=" +
                     std::to_string(res.grad_norm) + ")");
  }
  prob.x_star = std::move(res.x);
  return prob;
}

Dataset make_a9a_like(std::size_t n_examples, std::uint64_t seed) {
  static constexpr std::size_t kGroups[] = {5, 8, 5, 16, 5, 7, 14, 6, 5, 2, 2, 2, 5, 41};
  Dataset data;
  data.dim = kA9aDim;
  RngStream rng = RngStream::derive(seed, 0, 0, 0x413941ULL);

  // Category weights decay geometrically within a group; planted weights are
  // Gaussian. The intercept is solved so the expected positive rate is 24%.
  std::vector<std::vector<double>> cdf;
  DenseVector w(kA9aDim);
  for (auto& v : w) v = rng.normal();
  for (std::size_t size : kGroups) {
    std::vector<double> c(size);
    double acc = 0.0;
    for (std::size_t j = 0; j < size; ++j) {
      acc += std::pow(0.6, static_cast<double>(j)) * (0.5 + rng.uniform01());
      c[j] = acc;
    }
    for (auto& v : c) v /= acc;
    cdf.push_back(std::move(c));
  }

  data.examples.reserve(n_examples);
  std::vector<double> scores(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) {
    Example ex;
    ex.features.dim = static_cast<std::uint32_t>(kA9aDim);
    std::size_t base = 0;
    double score = 0.0;
    for (const auto& c : cdf) {
      const double u = rng.uniform01();
      std::size_t j = 0;
      while (j + 1 < c.size() && u >= c[j]) ++j;
      ex.features.entries.push_back({static_cast<std::uint32_t>(base + j), 1.0});
      score += w[base + j];
      base += c.size();
    }
    scores[i] = score;
    data.examples.push_back(std::move(ex));
  }

  constexpr double kPositiveRate = 0.24;
  double lo = -50.0, hi = 50.0;
  for (int it = 0; it < 100 && n_examples > 0; ++it) {
    const double mid = 0.5 * (lo + hi);
    double rate = 0.0;
    for (double s : scores) rate += sigmoid(s + mid);
    (rate / static_cast<double>(n_examples) < kPositiveRate ? lo : hi) = mid;
  }
  const double intercept = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < n_examples; ++i) {
    data.examples[i].label = rng.uniform01() < sigmoid(scores[i] + intercept) ? 1 : -1;
  }
  return data;
}

void write_vector(std::ostream& out, const DenseVector& x) {
  char buf[32];
  for (std::size_t j = 0; j < x.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", x[j]);
    out << (j ? " " : "") << buf;
  }
  out << '\n';
  if (!out) throw IoError("write_vector: stream failure");
}

DenseVector read_vector(std::istream& in) {
  DenseVector x;
  std::string tok;
  while (in >> tok) {
    double v;
    if (!parse_double(tok, v)) throw IoError("read_vector: bad value '" + tok + "'");
    x.push_back(v);
  }
  return x;
}

}  // namespace byzef

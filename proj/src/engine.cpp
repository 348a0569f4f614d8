#include "byzef/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>

#include "byzef/loss.hpp"

namespace byzef {

std::string to_string(Algorithm a) {
  return a == Algorithm::ByzEF21SGDM ? "byz_ef21_sgdm" : "br_csgd";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "byz_ef21_sgdm") return Algorithm::ByzEF21SGDM;
  if (name == "br_csgd") return Algorithm::BRCSGD;
  throw ConfigError("unknown algorithm '" + name + "' (expected byz_ef21_sgdm|br_csgd)");
}

void RunConfig::validate() const {
  if (n < 1) throw ConfigError("n: need at least one worker");
  if (2 * f >= n) {
    throw ConfigError("f: need f < n/2 (n=" + std::to_string(n) + ", f=" + std::to_string(f) + ")");
  }
  if (eval_every < 1) throw ConfigError("eval_every: must be >= 1");
  if (eta && !(*eta > 0.0 && *eta <= 1.0)) throw ConfigError("eta: must lie in (0, 1]");
  if (gamma && !(*gamma >= 0.0)) throw ConfigError("gamma: must be >= 0");
  if (epochs && !(*epochs >= 0.0)) throw ConfigError("epochs: must be >= 0");
  if (lambda && !(*lambda >= 0.0)) throw ConfigError("lambda: must be >= 0");
  if (kappa && !(*kappa >= 0.0)) throw ConfigError("kappa: must be >= 0");
  if (compressor.k < 1) throw ConfigError("k: must be >= 1");
  if (compressor.alpha && !(*compressor.alpha > 0.0 && *compressor.alpha <= 1.0)) {
    throw ConfigError("alpha: must lie in (0, 1]");
  }
  if (value_bits <= 0) throw ConfigError("value_bits: must be positive");
  if (threads < 1) throw ConfigError("threads: must be >= 1");
  if (algorithm == Algorithm::BRCSGD && !compressor.unbiased()) {
    throw ConfigError("compressor: br_csgd needs an unbiased compressor (randk or identity)");
  }
  AggregatorSpec agg = aggregator;
  agg.f = f;
  try {
    agg.validate(n);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("aggregator: ") + e.what());
  }
  attack.validate();
  if (attack.kind != AttackKind::None && f == 0) {
    throw ConfigError("attack: an attack needs f >= 1 Byzantine workers");
  }
  if (attack.kind == AttackKind::ALIE && n - f < 2) {
    throw ConfigError("attack: alie needs at least two honest workers");
  }
}

// ---------------------------------------------------------------------------

Problem problem_from_shards(std::vector<Shard> shards, std::size_t dim) {
  Problem p;
  p.dim = dim;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto& s : shards) {
    Dataset tmp;
    tmp.dim = dim;
    tmp.examples = s.examples;
    h = mix64(h ^ tmp.content_hash());
    p.shards.push_back(std::make_shared<const Shard>(std::move(s)));
  }
  p.data_hash = h;
  return p;
}

Dataset load_dataset(const RunConfig& config) {
  Dataset data;
  if (config.data.path == "synthetic") {
    data = make_blobs(config.data.synthetic_examples, config.data.synthetic_dim,
                      config.data.synthetic_separation, config.seed);
  } else if (config.data.path == "a9a_like") {
    data = make_a9a_like(kA9aExamples, 0xA9A);
  } else {
    data = load_libsvm(config.data.path, config.data.dim);
  }
  if (config.data.normalize) normalize_rows(data);
  return data;
}

bool dataset_is_seed_independent(const DataSource& source) { return source.path != "synthetic"; }

Problem make_problem(const RunConfig& config, const Dataset& data) {
  std::vector<Shard> shards = config.data.partition == PartitionKind::Uniform
                                  ? partition_uniform(data, config.n, config.seed)
                                  : partition_label_sorted(data, config.n, config.seed);
  Problem p = problem_from_shards(std::move(shards), data.dim);
  p.data_hash = data.content_hash();
  return p;
}

Problem load_problem(const RunConfig& config) { return make_problem(config, load_dataset(config)); }

std::vector<double> worker_lambdas(const RunConfig& config, const Problem& problem) {
  std::vector<double> out;
  for (const auto& s : problem.shards) {
    out.push_back(config.lambda ? *config.lambda : 1.0 / static_cast<double>(s->size()));
  }
  return out;
}

SmoothnessEstimate estimate_smoothness(const RunConfig& config, const Problem& problem) {
  const auto lambdas = worker_lambdas(config, problem);
  const std::size_t honest = config.n - config.f;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < honest; ++i) {
    const double Li =
        logistic_smoothness_bound(std::span<const Example>(problem.shards[i]->examples), lambdas[i]);
    sum += Li;
    sum_sq += Li * Li;
  }
  return {sum / static_cast<double>(honest), std::sqrt(sum_sq / static_cast<double>(honest))};
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t used = std::min(threads, count);
  std::vector<std::jthread> pool;
  pool.reserve(used);
  for (std::size_t w = 0; w < used; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += used) fn(i);
    });
  }
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

struct Resolved {
  double gamma;
  double eta;
  std::size_t rounds;
};

Resolved resolve(const RunConfig& config, const Problem& problem) {
  Resolved r{};
  if (config.epochs) {
    std::size_t total = 0;
    for (const auto& s : problem.shards) total += s->size();
    const std::size_t per_worker = total / config.n;
    const std::size_t steps = config.batch_size == kFullBatch
                                  ? 1
                                  : (per_worker + config.batch_size - 1) / config.batch_size;
    r.rounds = static_cast<std::size_t>(std::llround(*config.epochs * static_cast<double>(steps)));
  } else {
    r.rounds = config.rounds;
  }

  const SmoothnessEstimate sm = estimate_smoothness(config, problem);
  TheoryParams tp;
  tp.L = sm.L;
  tp.L_tilde = sm.L_tilde;
  tp.kappa = config.kappa.value_or(0.0);
  tp.alpha = config.compressor.alpha_for(problem.dim);
  tp.n = config.n;
  tp.f = config.f;
  tp.sigma_sq = config.sigma_sq;
  tp.delta0 = config.delta0;
  tp.rounds = r.rounds;

  if (config.eta) {
    r.eta = *config.eta;
  } else {
    if (!config.sigma_sq || !config.delta0) {
      throw ConfigError("eta: auto needs sigma_sq and delta0 estimates");
    }
    r.eta = theorem1_eta(tp);
  }
  if (config.gamma) {
    r.gamma = *config.gamma;
  } else {
    if (!config.kappa) throw ConfigError("gamma: auto needs kappa");
    tp.eta = r.eta;
    r.gamma = theorem1_params(tp).gamma_max;
  }
  return r;
}

WorkerState bare_state(std::size_t id, std::shared_ptr<const Shard> shard, std::size_t d,
                       const WorkerOptions& opt) {
  if (!shard || shard->empty()) throw StateError("worker " + std::to_string(id) + ": empty shard");
  WorkerState s;
  s.id = id;
  s.shard = std::move(shard);
  s.v.assign(d, 0.0);
  s.g.assign(d, 0.0);
  s.eta = opt.eta;
  s.compressor = opt.compressor;
  s.lambda = opt.lambda;
  s.batch_size = opt.batch_size;
  s.flip_labels = opt.flip_labels;
  return s;
}

class Simulation {
 public:
  Simulation(const RunConfig& config, const Problem& problem, const RunHooks& hooks)
      : cfg_(config), prob_(problem), hooks_(hooks) {}

  RunResult execute() {
    cfg_.validate();
    const std::size_t d = prob_.dim;
    if (prob_.shards.size() != cfg_.n) throw ConfigError("n: shard count does not match n");
    if (cfg_.compressor.k > d) {
      throw ConfigError("k: compressor k=" + std::to_string(cfg_.compressor.k) +
                        " exceeds dimension " + std::to_string(d));
    }
    const Resolved res = resolve(cfg_, prob_);
    honest_ = cfg_.n - cfg_.f;
    lambdas_ = worker_lambdas(cfg_, prob_);
    for (std::size_t i = 0; i < honest_; ++i) {
      objectives_.push_back({prob_.shards[i].get(), lambdas_[i]});
    }
    alie_z_ = cfg_.attack.z ? *cfg_.attack.z : (cfg_.attack.kind == AttackKind::ALIE
                                                    ? alie_auto_z(cfg_.n, cfg_.f)
                                                    : 0.0);
    attack_k_ = cfg_.attack.k ? cfg_.attack.k : cfg_.compressor.k;

    AggregatorSpec agg = cfg_.aggregator;
    agg.f = cfg_.f;
    server_ = std::make_unique<ServerState>(
        ServerState::create(DenseVector(d, 0.0), cfg_.n, res.gamma, agg));

    result_.gamma = res.gamma;
    result_.eta = res.eta;
    result_.rounds = res.rounds;

    for (std::size_t i = 0; i < cfg_.n; ++i) {
      WorkerOptions opt;
      opt.eta = res.eta;
      opt.compressor = cfg_.compressor;
      opt.lambda = lambdas_[i];
      opt.batch_size = cfg_.batch_size;
      opt.flip_labels = is_byzantine(cfg_, i) && cfg_.attack.kind == AttackKind::LF;
      workers_.push_back(bare_state(i, prob_.shards[i], d, opt));
    }

    std::ofstream trace;
    if (!cfg_.trace_path.empty()) {
      trace.open(cfg_.trace_path, std::ios::binary);
      if (!trace) throw IoError("cannot open trace file '" + cfg_.trace_path + "'");
    }

    messages_.assign(cfg_.n, SparseDelta{});
    for (std::size_t t = 0; t < res.rounds; ++t) {
      const DenseVector x_before = server_->x;
      produce_messages(t, x_before);
      result_.uplink_bits += account_round(messages_, cfg_.value_bits);
      if (trace.is_open()) {
        for (std::size_t i = 0; i < cfg_.n; ++i) {
          put_u32(trace, static_cast<std::uint32_t>(t));
          put_u32(trace, static_cast<std::uint32_t>(i));
          write_delta(trace, messages_[i]);
        }
      }
      if (cfg_.algorithm == Algorithm::ByzEF21SGDM) {
        server_round(*server_, messages_);
      } else {
        brcsgd_server_round(*server_, messages_);
      }
      result_.rounds_completed = t + 1;
      if (hooks_.on_round) {
        hooks_.on_round(RoundContext{t, *server_, workers_, messages_, x_before});
      }
      if (t % cfg_.eval_every == 0) {
        const RoundMetrics m = evaluate(t, x_before, true);
        result_.metrics.push_back(m);
        if (diverged(m)) {
          result_.status = RunStatus::Diverged;
          break;
        }
      }
      if (!all_finite(server_->x)) {
        result_.status = RunStatus::Diverged;
        break;
      }
    }
    if (result_.status == RunStatus::Completed && res.rounds > 0) {
      const RoundMetrics m = evaluate(res.rounds, server_->x, false);
      result_.metrics.push_back(m);
      if (diverged(m)) result_.status = RunStatus::Diverged;
    }
    result_.x = server_->x;
    return std::move(result_);
  }

 private:
  static bool diverged(const RoundMetrics& m) {
    return !std::isfinite(m.train_loss) || m.train_loss > 1e6;
  }

  bool runs_pipeline(std::size_t i) const {
    if (!is_byzantine(cfg_, i)) return true;
    const AttackKind k = cfg_.attack.kind;
    return k == AttackKind::None || k == AttackKind::SF || k == AttackKind::LF;
  }

  // Message worker i would send if it followed the protocol (with its own labels
  // flipped when it is a label-flipping attacker).
  SparseDelta pipeline_message(std::size_t i, std::size_t t, std::span<const double> x) {
    WorkerState& w = workers_[i];
    w.rng = RngStream::derive(cfg_.seed, i, t);
    if (cfg_.algorithm == Algorithm::BRCSGD) return brcsgd_worker_round(w, x);
    if (t == 0) {
      WorkerOptions opt{w.eta, w.compressor, w.lambda, w.batch_size, w.flip_labels};
      auto [state, g0] = worker_init(i, w.shard, x, opt, w.rng);
      w = std::move(state);
      return SparseDelta::from_dense(g0);
    }
    return worker_round(w, x);
  }

  void produce_messages(std::size_t t, std::span<const double> x) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < cfg_.n; ++i) {
      if (runs_pipeline(i)) active.push_back(i);
    }
    parallel_for(active.size(), cfg_.threads,
                 [&](std::size_t r) { messages_[active[r]] = pipeline_message(active[r], t, x); });

    if (cfg_.f == 0) return;
    const bool init_round = t == 0 && cfg_.algorithm == Algorithm::ByzEF21SGDM;
    const bool silent_init = init_round && !cfg_.byz_init_attack;
    const std::size_t d = prob_.dim;

    switch (cfg_.attack.kind) {
      case AttackKind::None:
      case AttackKind::LF:
        break;
      case AttackKind::SF:
        for (std::size_t i = honest_; i < cfg_.n; ++i) messages_[i] = attack_sf(messages_[i]);
        break;
      case AttackKind::IPM:
      case AttackKind::ALIE: {
        RoundView view;
        view.round = t;
        view.honest_deltas.assign(messages_.begin(),
                                  messages_.begin() + static_cast<std::ptrdiff_t>(honest_));
        for (std::size_t i = honest_; i < cfg_.n; ++i) view.byz_ids.push_back(i);
        const SparseDelta shared = cfg_.attack.kind == AttackKind::IPM
                                       ? attack_ipm(view, cfg_.attack.epsilon, attack_k_)
                                       : attack_alie(view, alie_z_, attack_k_);
        for (std::size_t i = honest_; i < cfg_.n; ++i) messages_[i] = shared;
        break;
      }
    }
    if (silent_init && cfg_.attack.kind != AttackKind::None) {
      for (std::size_t i = honest_; i < cfg_.n; ++i) {
        messages_[i] = SparseDelta{static_cast<std::uint32_t>(d), {}};
      }
    }
  }

  RoundMetrics evaluate(std::size_t t, std::span<const double> x, bool with_state) {
    RoundMetrics m;
    m.round = t;
    m.uplink_bits = result_.uplink_bits;

    std::vector<DenseVector> grads(honest_);
    std::vector<double> losses(honest_);
    parallel_for(honest_, cfg_.threads, [&](std::size_t i) {
      grads[i] = objectives_[i].grad(x);
      losses[i] = objectives_[i].loss(x);
    });
    double loss = 0.0;
    DenseVector mean_grad(x.size(), 0.0);
    for (std::size_t i = 0; i < honest_; ++i) {
      loss += losses[i];
      axpy(1.0, grads[i], mean_grad);
    }
    const double inv = 1.0 / static_cast<double>(honest_);
    for (auto& c : mean_grad) c *= inv;
    m.train_loss = loss * inv;
    m.grad_norm_sq = norm_sq(mean_grad);
    m.heterogeneity = heterogeneity_of(grads);

    if (with_state && cfg_.algorithm == Algorithm::ByzEF21SGDM) {
      std::vector<DenseVector> shadows(server_->shadows.begin(),
                                       server_->shadows.begin() + static_cast<std::ptrdiff_t>(honest_));
      std::vector<DenseVector> momenta;
      momenta.reserve(honest_);
      for (std::size_t i = 0; i < honest_; ++i) momenta.push_back(workers_[i].v);
      const Lemma2Result l2 =
          lemma2_check(server_->last_aggregate, shadows, momenta, grads, cfg_.kappa.value_or(0.0));
      m.lemma2_lhs = l2.lhs;
      if (cfg_.kappa) m.lemma2_rhs = l2.rhs;
      m.comp_err = l2.compression_err_sum;
      m.mom_dev = l2.momentum_dev_sum;
      DenseVector mean_v(x.size(), 0.0);
      for (const auto& v : momenta) axpy(1.0, v, mean_v);
      for (auto& c : mean_v) c *= inv;
      m.mean_mom_dev = dist_sq(mean_v, mean_grad);
    }
    return m;
  }

  const RunConfig& cfg_;
  const Problem& prob_;
  const RunHooks& hooks_;
  std::size_t honest_ = 0;
  std::vector<double> lambdas_;
  std::vector<LocalObjective> objectives_;
  double alie_z_ = 0.0;
  std::size_t attack_k_ = 1;
  std::unique_ptr<ServerState> server_;
  std::vector<WorkerState> workers_;
  std::vector<SparseDelta> messages_;
  RunResult result_;
};

void put_number(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

RunResult run(const RunConfig& config, const Problem& problem, const RunHooks& hooks) {
  return Simulation(config, problem, hooks).execute();
}

RunResult run(const RunConfig& config, const RunHooks& hooks) {
  config.validate();
  const Problem problem = load_problem(config);
  return run(config, problem, hooks);
}

std::string metrics_csv_header() {
  return "round,train_loss,grad_norm_sq,heterogeneity,uplink_bits,lemma2_lhs,lemma2_rhs,comp_err,"
         "mom_dev,mean_mom_dev";
}

void write_metrics_csv(std::ostream& out, std::span<const RoundMetrics> metrics) {
  out << metrics_csv_header() << '\n';
  for (const auto& m : metrics) {
    out << m.round << ',';
    put_number(out, m.train_loss);
    out << ',';
    put_number(out, m.grad_norm_sq);
    out << ',';
    put_number(out, m.heterogeneity);
    out << ',' << m.uplink_bits << ',';
    put_number(out, m.lemma2_lhs);
    out << ',';
    put_number(out, m.lemma2_rhs);
    out << ',';
    put_number(out, m.comp_err);
    out << ',';
    put_number(out, m.mom_dev);
    out << ',';
    put_number(out, m.mean_mom_dev);
    out << '\n';
  }
  if (!out) throw IoError("write_metrics_csv: stream failure");
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw IoError("read_trace: truncated record header");
    TraceRecord r;
    for (int i = 0; i < 4; ++i) r.round |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    for (int i = 0; i < 4; ++i) r.worker |= static_cast<std::uint32_t>(b[4 + i]) << (8 * i);
    r.delta = read_delta(in);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace byzef

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "byzef/config.hpp"
#include "byzef/engine.hpp"
#include "byzef/errors.hpp"
#include "byzef/loss.hpp"

using namespace byzef;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.n = 4;
  c.f = 0;
  c.seed = 3;
  c.rounds = 30;
  c.gamma = 0.5;
  c.eta = 0.2;
  c.batch_size = 4;
  c.compressor.kind = CompressorKind::TopK;
  c.compressor.k = 2;
  c.aggregator.rule = AggregationRule::Avg;
  c.eval_every = 5;
  c.data.synthetic_examples = 200;
  c.data.synthetic_dim = 5;
  return c;
}

std::string csv_of(const RunResult& r) {
  std::ostringstream out;
  write_metrics_csv(out, r.metrics);
  return out.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("byzef_test_engine_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Engine, ZeroRoundsProducesNoMetrics) {
  RunConfig c = small_config();
  c.rounds = 0;
  const auto r = run(c);
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_EQ(r.rounds_completed, 0u);
  EXPECT_EQ(r.uplink_bits, 0u);
  EXPECT_EQ(r.status, RunStatus::Completed);
}

TEST(Engine, SameConfigSameBytes) {
  RunConfig c = small_config();
  c.n = 6;
  c.f = 2;
  c.attack.kind = AttackKind::ALIE;
  c.aggregator.rule = AggregationRule::CWTM;
  c.aggregator.use_nnm = true;
  EXPECT_EQ(csv_of(run(c)), csv_of(run(c)));
}

TEST(Engine, ThreadCountDoesNotChangeOutput) {
  for (AttackKind a : {AttackKind::SF, AttackKind::LF, AttackKind::IPM, AttackKind::ALIE}) {
    RunConfig c = small_config();
    c.n = 7;
    c.f = 3;
    c.attack.kind = a;
    c.aggregator.rule = AggregationRule::RFA;
    c.aggregator.use_nnm = true;
    c.compressor.kind = CompressorKind::RandK;
    const auto one = run(c);
    c.threads = 4;
    const auto four = run(c);
    EXPECT_EQ(csv_of(one), csv_of(four)) << to_string(a);
    EXPECT_EQ(one.x, four.x);
  }
}

TEST(Engine, ReducesToGradientDescent) {
  RunConfig c = small_config();
  c.compressor.kind = CompressorKind::Identity;
  c.eta = 1.0;
  c.batch_size = kFullBatch;
  c.eval_every = 1;
  c.rounds = 40;
  c.gamma = 0.8;
  const Problem p = load_problem(c);
  const auto r = run(c, p);
  ASSERT_EQ(r.metrics.size(), 41u);

  const auto lambdas = worker_lambdas(c, p);
  DenseVector x(p.dim, 0.0);
  for (std::size_t t = 0; t <= c.rounds; ++t) {
    double loss = 0.0;
    DenseVector grad(p.dim, 0.0);
    for (std::size_t i = 0; i < c.n; ++i) {
      const std::span<const Example> ex(p.shards[i]->examples);
      loss += logistic_loss(x, ex, lambdas[i]) / 4.0;
      axpy(0.25, logistic_grad(x, ex, lambdas[i]), grad);
    }
    EXPECT_NEAR(r.metrics[t].train_loss, loss, 1e-12) << t;
    if (t < c.rounds) axpy(-0.8, grad, x);
  }
  for (std::size_t j = 0; j < p.dim; ++j) EXPECT_NEAR(r.x[j], x[j], 1e-12);
}

TEST(Engine, BaselineSharesEvaluationPath) {
  RunConfig c = small_config();
  c.compressor.kind = CompressorKind::Identity;
  c.eta = 1.0;
  c.batch_size = kFullBatch;
  const auto ef = run(c);
  c.algorithm = Algorithm::BRCSGD;
  const auto br = run(c);
  ASSERT_EQ(ef.metrics.size(), br.metrics.size());
  for (std::size_t i = 0; i < ef.metrics.size(); ++i) {
    EXPECT_EQ(ef.metrics[i].round, br.metrics[i].round);
    EXPECT_NEAR(ef.metrics[i].train_loss, br.metrics[i].train_loss, 1e-12);
    EXPECT_NEAR(ef.metrics[i].grad_norm_sq, br.metrics[i].grad_norm_sq, 1e-12);
    EXPECT_EQ(ef.metrics[i].uplink_bits, br.metrics[i].uplink_bits);
  }
  EXPECT_TRUE(std::isnan(br.metrics[0].comp_err));
  EXPECT_FALSE(std::isnan(ef.metrics[0].comp_err));
}

TEST(Engine, ValidationErrors) {
  RunConfig c = small_config();
  c.n = 20;
  c.f = 10;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.compressor.k = 6;
  EXPECT_THROW(run(c), ConfigError);
  c = small_config();
  c.algorithm = Algorithm::BRCSGD;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.attack.kind = AttackKind::SF;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.eta = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.gamma.reset();
  EXPECT_THROW(run(c), ConfigError);
  c = small_config();
  c.eta.reset();
  EXPECT_THROW(run(c), ConfigError);
  c = small_config();
  c.data.path = "/nonexistent/file.libsvm";
  EXPECT_THROW(run(c), IoError);
}

TEST(Engine, ConfigErrorNamesKey) {
  RunConfig c = small_config();
  c.n = 20;
  c.f = 10;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("f:", 0), 0u);
  }
}

TEST(Engine, AutoStepSizeFromTheory) {
  RunConfig c = small_config();
  c.gamma.reset();
  c.kappa = 0.0;
  const Problem p = load_problem(c);
  const auto r = run(c, p);
  const auto sm = estimate_smoothness(c, p);
  TheoryParams tp;
  tp.L = sm.L;
  tp.L_tilde = sm.L_tilde;
  tp.alpha = 2.0 / 5.0;
  tp.n = 4;
  tp.eta = 0.2;
  EXPECT_EQ(r.gamma, theorem1_params(tp).gamma_max);
  EXPECT_EQ(r.status, RunStatus::Completed);
}

TEST(Engine, DivergenceStopsRun) {
  RunConfig c = small_config();
  c.gamma = 1e9;
  c.eval_every = 1;
  const auto r = run(c);
  EXPECT_EQ(r.status, RunStatus::Diverged);
  EXPECT_LT(r.rounds_completed, c.rounds);
  EXPECT_LT(r.metrics.back().round, c.rounds);
}

TEST(Engine, CsvLayout) {
  const auto r = run(small_config());
  const std::string csv = csv_of(r);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, metrics_csv_header());
  EXPECT_EQ(line,
            "round,train_loss,grad_norm_sq,heterogeneity,uplink_bits,lemma2_lhs,lemma2_rhs,comp_err,"
            "mom_dev,mean_mom_dev");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 7u);  // rounds 0, 5, ..., 25 and the final row at 30
  EXPECT_EQ(rows.front().substr(0, 2), "0,");
  EXPECT_EQ(rows.back().substr(0, 3), "30,");
  EXPECT_NE(rows.front().find(",nan,"), std::string::npos);  // lemma2_rhs without kappa
  EXPECT_EQ(rows.back().substr(rows.back().size() - 20), ",nan,nan,nan,nan,nan");
  EXPECT_EQ(r.metrics.back().round, 30u);
  EXPECT_EQ(r.metrics.back().uplink_bits, r.uplink_bits);
}

TEST(Engine, UplinkAccounting) {
  RunConfig c = small_config();
  c.rounds = 10;
  const auto r = run(c);
  // d=5 gives 3 index bits. Round 0 sends the dense initial vector, later
  // rounds at most k=2 entries per worker.
  const std::uint64_t per_entry = 32 + 3;
  EXPECT_EQ(r.metrics[0].uplink_bits, 4 * 5 * per_entry);
  EXPECT_LE(r.uplink_bits, 4 * per_entry * (5 + 9 * 2));
  EXPECT_GT(r.uplink_bits, r.metrics[0].uplink_bits);
}

TEST(Engine, TraceMatchesDeliveredMessages) {
  const fs::path dir = temp_dir("trace");
  RunConfig c = small_config();
  c.n = 5;
  c.f = 2;
  c.attack.kind = AttackKind::IPM;
  c.aggregator.rule = AggregationRule::CWMed;
  c.rounds = 6;
  c.trace_path = (dir / "trace.bin").string();
  std::vector<std::vector<SparseDelta>> seen;
  RunHooks hooks;
  hooks.on_round = [&](const RoundContext& ctx) {
    seen.emplace_back(ctx.messages.begin(), ctx.messages.end());
  };
  run(c, hooks);
  std::ifstream in(c.trace_path, std::ios::binary);
  const auto recs = read_trace(in);
  ASSERT_EQ(recs.size(), 6u * 5u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].round, i / 5);
    EXPECT_EQ(recs[i].worker, i % 5);
    EXPECT_EQ(recs[i].delta, seen[i / 5][i % 5]);
  }
  // The two IPM attackers send one shared message.
  EXPECT_EQ(recs[3 * 5 + 3].delta, recs[3 * 5 + 4].delta);
  fs::remove_all(dir);
}

TEST(Engine, EpochsConvertToRounds) {
  RunConfig c = small_config();
  c.rounds = 999;
  c.epochs = 2.0;
  c.batch_size = 10;  // 50 examples per worker: 5 steps per epoch
  EXPECT_EQ(run(c).rounds, 10u);
  c.batch_size = kFullBatch;
  c.epochs = 3.0;
  EXPECT_EQ(run(c).rounds, 3u);
}

TEST(Engine, LambdaDefaultsToInverseShardSize) {
  RunConfig c = small_config();
  c.data.synthetic_examples = 203;
  const Problem p = load_problem(c);
  const auto l = worker_lambdas(c, p);
  ASSERT_EQ(l.size(), 4u);
  EXPECT_EQ(l[0], 1.0 / 51.0);
  EXPECT_EQ(l[3], 1.0 / 50.0);
  c.lambda = 0.3;
  EXPECT_EQ(worker_lambdas(c, p)[2], 0.3);
}

TEST(Engine, HonestShadowsTrackWorkerState) {
  RunConfig c = small_config();
  c.n = 7;
  c.f = 3;
  c.attack.kind = AttackKind::SF;
  c.aggregator.rule = AggregationRule::CWTM;
  c.compressor.k = 1;
  std::size_t checked = 0;
  RunHooks hooks;
  hooks.on_round = [&](const RoundContext& ctx) {
    for (std::size_t i = 0; i < 4; ++i) {
      ASSERT_EQ(ctx.server.shadows[i], ctx.workers[i].g);
      ++checked;
    }
  };
  run(c, hooks);
  EXPECT_EQ(checked, 4u * c.rounds);
}

TEST(Engine, ByzantineInitCanBeSilent) {
  RunConfig c = small_config();
  c.n = 5;
  c.f = 2;
  c.attack.kind = AttackKind::SF;
  c.aggregator.rule = AggregationRule::CWMed;
  c.byz_init_attack = false;
  std::vector<SparseDelta> first;
  RunHooks hooks;
  hooks.on_round = [&](const RoundContext& ctx) {
    if (ctx.round == 0) first.assign(ctx.messages.begin(), ctx.messages.end());
  };
  run(c, hooks);
  EXPECT_TRUE(first[3].entries.empty());
  EXPECT_TRUE(first[4].entries.empty());
  EXPECT_FALSE(first[0].entries.empty());
}

TEST(Engine, WorkerStreamsAreIndependent) {
  RngStream a = RngStream::derive(7, 0, 5);
  RngStream b = RngStream::derive(7, 1, 5);
  RngStream c = RngStream::derive(7, 0, 6);
  const auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
  EXPECT_NE(x, y);
  EXPECT_NE(x, z);
  EXPECT_NE(y, z);
}

TEST(Engine, SeedChangesStochasticRun) {
  RunConfig c = small_config();
  const auto a = run(c);
  c.seed = 4;
  const auto b = run(c);
  EXPECT_NE(csv_of(a), csv_of(b));
}

TEST(Engine, Lemma2ColumnsPopulatedWithKappa) {
  RunConfig c = small_config();
  c.n = 7;
  c.f = 2;
  c.attack.kind = AttackKind::SF;
  c.aggregator.rule = AggregationRule::CWTM;
  c.aggregator.use_nnm = true;
  c.kappa = 10.0;
  const auto r = run(c);
  for (std::size_t i = 0; i + 1 < r.metrics.size(); ++i) {
    EXPECT_FALSE(std::isnan(r.metrics[i].lemma2_rhs));
    EXPECT_GE(r.metrics[i].lemma2_lhs, 0.0);
  }
}

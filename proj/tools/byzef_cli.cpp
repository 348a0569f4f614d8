#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "byzef/config.hpp"
#include "byzef/engine.hpp"
#include "byzef/matrix.hpp"

namespace fs = std::filesystem;
using namespace byzef;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitIo = 3;
constexpr int kExitInternal = 4;

struct Common {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

Settings gather_settings(const Common& c) {
  Settings s = c.config.empty() ? Settings{} : load_settings(c.config);
  for (const auto& o : c.overrides) s.push_back(split_override(o));
  if (c.seed) s.emplace_back("seed", std::to_string(*c.seed));
  return s;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

int cmd_run(const Common& c) {
  RunConfig config;
  apply_settings(config, gather_settings(c));
  config.validate();
  const fs::path dir(c.out_dir);
  ensure_dir(dir);
  const Problem problem = load_problem(config);
  const RunResult res = run(config, problem);

  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  if (!csv) throw IoError("cannot write '" + (dir / "metrics.csv").string() + "'");
  write_metrics_csv(csv, res.metrics);
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!manifest) throw IoError("cannot write '" + (dir / "manifest.txt").string() + "'");
  write_manifest(manifest, config, problem.data_hash, res);

  const double last = res.metrics.empty() ? 0.0 : res.metrics.back().train_loss;
  std::printf("status=%s rounds=%zu final_train_loss=%s uplink_bits=%llu\n",
              res.status == RunStatus::Completed ? "completed" : "diverged", res.rounds_completed,
              format_double(last).c_str(), static_cast<unsigned long long>(res.uplink_bits));
  return res.status == RunStatus::Completed ? kExitOk : kExitDiverged;
}

int cmd_matrix(const Common& c, std::optional<std::size_t> parallel) {
  if (c.config.empty()) throw ConfigError("matrix: --config is required");
  ExperimentMatrix m = parse_matrix(gather_settings(c));
  if (c.seed) m.seeds = {*c.seed};
  if (parallel) m.parallel = *parallel;
  const MatrixReport report = run_matrix(m, c.out_dir, [](const CellResult& r) {
    std::fprintf(stderr, "%s %s %s seed=%llu gamma=%s final_loss=%s%s\n",
                 to_string(r.key.algorithm).c_str(), r.key.aggregator.label().c_str(),
                 to_string(r.key.attack).c_str(), static_cast<unsigned long long>(r.key.seed),
                 format_double(r.key.gamma).c_str(), format_double(r.final_loss).c_str(),
                 r.reused ? " (reused)" : "");
  });
  std::printf("cells=%zu ran=%zu skipped=%zu index=%s\n", report.cells.size(), report.ran,
              report.skipped, (fs::path(c.out_dir) / "index.csv").string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust compressed SGD simulator"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config, "key=value config file");
    sub->add_option("--out-dir", common.out_dir, "output directory");
    sub->add_option("--seed", common.seed, "override the seed");
    sub->add_option("--override", common.overrides, "key=value (repeatable)");
  };

  auto* run_cmd = app.add_subcommand("run", "single run: metrics.csv and manifest.txt");
  add_common(run_cmd);

  std::optional<std::size_t> parallel;
  auto* matrix_cmd = app.add_subcommand("matrix", "experiment grid with index.csv");
  add_common(matrix_cmd);
  matrix_cmd->add_option("--parallel", parallel, "cells evaluated concurrently");

  std::string rule = "cwtm";
  std::size_t cn = 10, cf = 2, cd = 5, trials = 1000;
  std::uint64_t cseed = 1;
  auto* certify_cmd = app.add_subcommand("certify", "empirical (f, kappa)-robustness certificate");
  certify_cmd->add_option("--rule", rule, "avg|cwmed|cwtm|rfa, optionally with +nnm");
  certify_cmd->add_option("--n", cn, "inputs");
  certify_cmd->add_option("--f", cf, "Byzantine inputs");
  certify_cmd->add_option("--d", cd, "dimension");
  certify_cmd->add_option("--trials", trials, "random input sets");
  certify_cmd->add_option("--seed", cseed, "RNG seed");

  TheoryParams tp;
  std::optional<double> sigma_sq, delta0;
  std::optional<std::size_t> rounds;
  auto* theory_cmd = app.add_subcommand("theory", "step-size and momentum calculator");
  theory_cmd->add_option("--L", tp.L, "smoothness of the honest loss");
  theory_cmd->add_option("--L-tilde", tp.L_tilde, "root-mean-square local smoothness");
  theory_cmd->add_option("--kappa", tp.kappa, "aggregator robustness coefficient");
  theory_cmd->add_option("--alpha", tp.alpha, "compressor contraction");
  theory_cmd->add_option("--n", tp.n, "workers");
  theory_cmd->add_option("--f", tp.f, "Byzantine workers");
  theory_cmd->add_option("--eta", tp.eta, "momentum");
  theory_cmd->add_option("--sigma-sq", sigma_sq, "gradient noise variance");
  theory_cmd->add_option("--delta0", delta0, "initial suboptimality");
  theory_cmd->add_option("--rounds", rounds, "number of rounds");

  std::string trace_file;
  auto* trace_cmd = app.add_subcommand("trace-dump", "print a binary message trace as CSV");
  trace_cmd->add_option("trace", trace_file, "trace file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(common);
    if (*matrix_cmd) return cmd_matrix(common, parallel);
    if (*certify_cmd) {
      AggregatorSpec spec;
      const AggregatorChoice choice = AggregatorChoice::parse(rule);
      spec.rule = choice.rule;
      spec.use_nnm = choice.nnm;
      RngStream rng(cseed);
      const auto cert = certify_kappa(spec, cn, cf, cd, trials, rng);
      std::printf("%s\n%s\n", RobustnessCertificate::csv_header().c_str(), cert.csv_row().c_str());
      return kExitOk;
    }
    if (*theory_cmd) {
      tp.sigma_sq = sigma_sq;
      tp.delta0 = delta0;
      tp.rounds = rounds;
      const TheoryResult r = theorem1_params(tp);
      std::printf("gamma_max=%s\n", format_double(r.gamma_max).c_str());
      std::printf("eta_suggestion=%s\n",
                  r.eta_suggestion ? format_double(*r.eta_suggestion).c_str() : "n/a");
      std::printf("Delta=%s\n", format_double(r.Delta).c_str());
      return kExitOk;
    }
    if (*trace_cmd) {
      std::ifstream in(trace_file, std::ios::binary);
      if (!in) throw IoError("cannot open trace '" + trace_file + "'");
      std::printf("round,worker,dim,entries\n");
      for (const auto& rec : read_trace(in)) {
        std::printf("%u,%u,%u,", rec.round, rec.worker, rec.delta.dim);
        for (std::size_t i = 0; i < rec.delta.entries.size(); ++i) {
          std::printf("%s%u:%s", i ? ";" : "", rec.delta.entries[i].index,
                      format_double(rec.delta.entries[i].value).c_str());
        }
        std::printf("\n");
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "i/o error: dataset %s\n", e.what());
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitOk;
}

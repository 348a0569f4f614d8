#include "byzef/matrix.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace byzef {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(key + ": empty list entry");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  for (const auto& item : split_list(key, value)) {
    try {
      out.push_back(parse(item));
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  return out;
}

std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string status_name(bool completed) { return completed ? "completed" : "diverged"; }

struct Cell {
  CellKey key;
  RunConfig config;
};

std::vector<Cell> enumerate(const ExperimentMatrix& m) {
  std::vector<Cell> cells;
  for (Algorithm alg : m.algorithms) {
    for (const auto& agg : m.aggregators) {
      for (AttackKind attack : m.attacks) {
        for (std::uint64_t seed : m.seeds) {
          for (double gamma : m.gammas) {
            CellKey key{alg, agg, attack, seed, gamma};
            cells.push_back({key, cell_config(m, key)});
          }
        }
      }
    }
  }
  return cells;
}

// Status of a previously finished cell, or nullopt when it must run again.
std::optional<bool> finished_status(const fs::path& manifest, const fs::path& csv,
                                    const RunConfig& config) {
  if (!fs::exists(manifest) || !fs::exists(csv)) return std::nullopt;
  std::ifstream in(manifest);
  std::optional<bool> status;
  std::string line;
  while (std::getline(in, line)) {
    if (line == "# status=completed") status = true;
    if (line == "# status=diverged") status = false;
  }
  in.clear();
  in.seekg(0);
  if (!status || parse_settings(in) != effective_settings(config)) return std::nullopt;
  return status;
}

void write_atomically(const fs::path& target, const std::function<void(std::ostream&)>& body) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    body(out);
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

}  // namespace

std::string AggregatorChoice::label() const { return to_string(rule) + (nnm ? "+nnm" : ""); }

AggregatorChoice AggregatorChoice::parse(const std::string& label) {
  AggregatorChoice c;
  std::string name = label;
  const std::string suffix = "+nnm";
  if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
    c.nnm = true;
    name.resize(name.size() - suffix.size());
  }
  c.rule = aggregation_rule_from_string(name);
  return c;
}

void ExperimentMatrix::validate() const {
  if (algorithms.empty()) throw ConfigError("algorithms: empty axis");
  if (aggregators.empty()) throw ConfigError("aggregators: empty axis");
  if (attacks.empty()) throw ConfigError("attacks: empty axis");
  if (seeds.empty()) throw ConfigError("seeds: empty axis");
  if (gammas.empty()) throw ConfigError("gammas: empty axis");
  if (parallel < 1) throw ConfigError("parallel: must be >= 1");
  for (const auto& cell : enumerate(*this)) cell.config.validate();
}

std::size_t ExperimentMatrix::cell_count() const {
  return algorithms.size() * aggregators.size() * attacks.size() * seeds.size() * gammas.size();
}

ExperimentMatrix parse_matrix(const Settings& settings) {
  ExperimentMatrix m;
  for (const auto& [key, value] : settings) {
    if (key == "algorithms") {
      m.algorithms = parse_list<Algorithm>(key, value, algorithm_from_string);
    } else if (key == "aggregators") {
      m.aggregators = parse_list<AggregatorChoice>(key, value, AggregatorChoice::parse);
    } else if (key == "attacks") {
      m.attacks = parse_list<AttackKind>(key, value, attack_kind_from_string);
    } else if (key == "seeds") {
      m.seeds = parse_list<std::uint64_t>(key, value, [&](const std::string& s) {
        RunConfig tmp;
        apply_setting(tmp, "seed", s);
        return tmp.seed;
      });
    } else if (key == "gammas") {
      m.gammas = parse_list<double>(key, value, [&](const std::string& s) {
        RunConfig tmp;
        apply_setting(tmp, "gamma", s);
        if (!tmp.gamma) throw ConfigError("auto is not allowed in a step-size grid");
        return *tmp.gamma;
      });
    } else if (key == "parallel") {
      RunConfig tmp;
      apply_setting(tmp, "threads", value);
      m.parallel = tmp.threads;
    } else if (const auto dot = key.find('.'); dot != std::string::npos) {
      const Algorithm alg = algorithm_from_string(key.substr(0, dot));
      const std::string sub = key.substr(dot + 1);
      RunConfig probe;
      apply_setting(probe, sub, value);  // rejects unknown keys early
      m.overrides[alg].emplace_back(sub, value);
    } else {
      apply_setting(m.base, key, value);
    }
  }
  if (m.aggregators.empty()) m.aggregators.push_back({m.base.aggregator.rule, m.base.aggregator.use_nnm});
  if (m.attacks.empty()) m.attacks.push_back(m.base.attack.kind);
  return m;
}

ExperimentMatrix load_matrix(const std::string& path) { return parse_matrix(load_settings(path)); }

RunConfig cell_config(const ExperimentMatrix& m, const CellKey& key) {
  RunConfig c = m.base;
  c.algorithm = key.algorithm;
  if (auto it = m.overrides.find(key.algorithm); it != m.overrides.end()) apply_settings(c, it->second);
  c.aggregator.rule = key.aggregator.rule;
  c.aggregator.use_nnm = key.aggregator.nnm;
  c.attack.kind = key.attack;
  c.seed = key.seed;
  c.gamma = key.gamma;
  c.trace_path.clear();
  return c;
}

std::string cell_stem(const CellKey& key) {
  std::string agg = to_string(key.aggregator.rule) + (key.aggregator.nnm ? "-nnm" : "");
  return to_string(key.algorithm) + "__" + agg + "__" + to_string(key.attack) + "__s" +
         std::to_string(key.seed) + "__g" + short_double(key.gamma);
}

std::string matrix_index_header() {
  return "algorithm,aggregator,attack,seed,gamma,csv_path,final_loss,status";
}

double final_train_loss(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open '" + csv_path.string() + "'");
  std::string line;
  std::string last;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  if (last.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto a = last.find(',');
  const auto b = last.find(',', a + 1);
  return std::strtod(last.substr(a + 1, b - a - 1).c_str(), nullptr);
}

MatrixReport run_matrix(const ExperimentMatrix& m, const fs::path& out_dir,
                        const std::function<void(const CellResult&)>& progress) {
  m.validate();
  const std::vector<Cell> cells = enumerate(m);
  const fs::path cell_dir = out_dir / "cells";
  std::error_code ec;
  fs::create_directories(cell_dir, ec);
  if (ec) throw IoError("cannot create '" + cell_dir.string() + "': " + ec.message());

  std::optional<Dataset> shared;
  if (dataset_is_seed_independent(m.base.data)) shared = load_dataset(m.base);

  MatrixReport report;
  report.cells.resize(cells.size());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;

  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        const Cell& cell = cells[i];
        const std::string stem = cell_stem(cell.key);
        const fs::path csv = cell_dir / (stem + ".csv");
        const fs::path manifest = cell_dir / (stem + ".manifest");
        CellResult r;
        r.key = cell.key;
        r.csv_path = (fs::path("cells") / (stem + ".csv")).generic_string();
        if (auto done = finished_status(manifest, csv, cell.config)) {
          r.completed = *done;
          r.reused = true;
        } else {
          fs::remove(manifest);
          const Problem problem =
              shared ? make_problem(cell.config, *shared) : load_problem(cell.config);
          const RunResult res = run(cell.config, problem);
          r.completed = res.status == RunStatus::Completed;
          write_atomically(csv, [&](std::ostream& out) { write_metrics_csv(out, res.metrics); });
          write_atomically(manifest, [&](std::ostream& out) {
            write_manifest(out, cell.config, problem.data_hash, res);
          });
        }
        r.final_loss = final_train_loss(csv);
        std::lock_guard lock(mu);
        report.cells[i] = r;
        if (progress) progress(r);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (m.parallel <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(m.parallel, cells.size()); ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& c : report.cells) (c.reused ? report.skipped : report.ran) += 1;

  // Best step size per (algorithm, aggregator, attack).
  const std::size_t per_group = m.seeds.size() * m.gammas.size();
  for (std::size_t g = 0; g < report.cells.size(); g += per_group) {
    BestGamma best{};
    best.mean_final_loss = std::numeric_limits<double>::infinity();
    best.gamma = m.gammas.front();
    for (std::size_t gi = 0; gi < m.gammas.size(); ++gi) {
      double sum = 0.0;
      for (std::size_t si = 0; si < m.seeds.size(); ++si) {
        const CellResult& c = report.cells[g + si * m.gammas.size() + gi];
        sum += c.completed && std::isfinite(c.final_loss) ? c.final_loss
                                                          : std::numeric_limits<double>::infinity();
      }
      const double mean = sum / static_cast<double>(m.seeds.size());
      if (mean < best.mean_final_loss) {
        best.mean_final_loss = mean;
        best.gamma = m.gammas[gi];
      }
    }
    const CellKey& k = report.cells[g].key;
    best.algorithm = k.algorithm;
    best.aggregator = k.aggregator;
    best.attack = k.attack;
    report.best.push_back(best);
  }

  write_atomically(out_dir / "index.csv", [&](std::ostream& out) {
    out << matrix_index_header() << '\n';
    for (const auto& c : report.cells) {
      out << to_string(c.key.algorithm) << ',' << c.key.aggregator.label() << ','
          << to_string(c.key.attack) << ',' << c.key.seed << ',' << format_double(c.key.gamma) << ','
          << c.csv_path << ',' << format_double(c.final_loss) << ',' << status_name(c.completed)
          << '\n';
    }
  });
  write_atomically(out_dir / "best_gamma.csv", [&](std::ostream& out) {
    out << "algorithm,aggregator,attack,best_gamma,mean_final_loss\n";
    for (const auto& b : report.best) {
      out << to_string(b.algorithm) << ',' << b.aggregator.label() << ',' << to_string(b.attack)
          << ',' << format_double(b.gamma) << ',' << format_double(b.mean_final_loss) << '\n';
    }
  });
  return report;
}

std::vector<CellResult> read_matrix_index(const fs::path& index_path) {
  std::ifstream in(index_path);
  if (!in) throw IoError("cannot open '" + index_path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line != matrix_index_header()) throw IoError("unexpected index header in '" + index_path.string() + "'");
  std::vector<CellResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 8) throw IoError("malformed index row '" + line + "'");
    CellResult r;
    r.key.algorithm = algorithm_from_string(f[0]);
    r.key.aggregator = AggregatorChoice::parse(f[1]);
    r.key.attack = attack_kind_from_string(f[2]);
    r.key.seed = std::stoull(f[3]);
    r.key.gamma = std::strtod(f[4].c_str(), nullptr);
    r.csv_path = f[5];
    r.final_loss = std::strtod(f[6].c_str(), nullptr);
    r.completed = f[7] == "completed";
    out.push_back(r);
  }
  return out;
}

}  // namespace byzef

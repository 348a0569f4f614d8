#include "byzef/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace byzef {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": invalid value '" + value + "' (expected " + expected + ")");
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v)) {
    bad_value(key, value, "a number");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || p != value.data() + value.size()) {
    bad_value(key, value, "a nonnegative integer");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "true|false");
}

std::optional<double> to_auto_double(const std::string& key, const std::string& value,
                                     const char* auto_word) {
  if (value == auto_word) return std::nullopt;
  return to_double(key, value);
}

std::string opt_double(const std::optional<double>& v, const char* auto_word) {
  return v ? format_double(*v) : std::string(auto_word);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Settings parse_settings(std::istream& in) {
  Settings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_settings(in);
}

std::pair<std::string, std::string> split_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + text + "' is not key=value");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "n") {
    c.n = to_u64(key, value);
  } else if (key == "f") {
    c.f = to_u64(key, value);
  } else if (key == "seed") {
    c.seed = to_u64(key, value);
  } else if (key == "rounds") {
    c.rounds = to_u64(key, value);
  } else if (key == "epochs") {
    c.epochs = to_auto_double(key, value, "none");
  } else if (key == "gamma") {
    c.gamma = to_auto_double(key, value, "auto");
  } else if (key == "eta") {
    c.eta = to_auto_double(key, value, "auto");
  } else if (key == "batch_size") {
    c.batch_size = value == "full" ? kFullBatch : to_u64(key, value);
  } else if (key == "compressor") {
    try {
      c.compressor.kind = compressor_kind_from_string(value);
    } catch (const ConfigError&) {
      bad_value(key, value, "topk|randk|identity");
    }
  } else if (key == "k") {
    c.compressor.k = to_u64(key, value);
  } else if (key == "alpha") {
    c.compressor.alpha = to_auto_double(key, value, "auto");
  } else if (key == "aggregator") {
    try {
      c.aggregator.rule = aggregation_rule_from_string(value);
    } catch (const ConfigError&) {
      bad_value(key, value, "avg|cwmed|cwtm|rfa");
    }
  } else if (key == "nnm") {
    c.aggregator.use_nnm = to_bool(key, value);
  } else if (key == "rfa_iterations") {
    c.aggregator.rfa_iterations = to_u64(key, value);
  } else if (key == "rfa_smoothing") {
    c.aggregator.rfa_smoothing = to_double(key, value);
  } else if (key == "attack") {
    try {
      c.attack.kind = attack_kind_from_string(value);
    } catch (const ConfigError&) {
      bad_value(key, value, "none|sf|lf|ipm|alie");
    }
  } else if (key == "epsilon") {
    c.attack.epsilon = to_double(key, value);
  } else if (key == "z") {
    c.attack.z = to_auto_double(key, value, "auto");
  } else if (key == "attack_k") {
    c.attack.k = value == "auto" ? 0 : to_u64(key, value);
  } else if (key == "algorithm") {
    try {
      c.algorithm = algorithm_from_string(value);
    } catch (const ConfigError&) {
      bad_value(key, value, "byz_ef21_sgdm|br_csgd");
    }
  } else if (key == "eval_every") {
    c.eval_every = to_u64(key, value);
  } else if (key == "dataset") {
    if (value.empty()) bad_value(key, value, "a path or 'synthetic'");
    c.data.path = value;
  } else if (key == "dim") {
    c.data.dim = value == "auto" ? 0 : to_u64(key, value);
  } else if (key == "normalize") {
    c.data.normalize = to_bool(key, value);
  } else if (key == "partition") {
    if (value == "uniform") {
      c.data.partition = PartitionKind::Uniform;
    } else if (value == "label_sorted") {
      c.data.partition = PartitionKind::LabelSorted;
    } else {
      bad_value(key, value, "uniform|label_sorted");
    }
  } else if (key == "synthetic_examples") {
    c.data.synthetic_examples = to_u64(key, value);
  } else if (key == "synthetic_dim") {
    c.data.synthetic_dim = to_u64(key, value);
  } else if (key == "synthetic_separation") {
    c.data.synthetic_separation = to_double(key, value);
  } else if (key == "lambda") {
    c.lambda = to_auto_double(key, value, "auto");
  } else if (key == "value_bits") {
    c.value_bits = static_cast<int>(to_u64(key, value));
  } else if (key == "byz_init") {
    if (value == "attack") {
      c.byz_init_attack = true;
    } else if (value == "zero") {
      c.byz_init_attack = false;
    } else {
      bad_value(key, value, "attack|zero");
    }
  } else if (key == "kappa") {
    c.kappa = to_auto_double(key, value, "none");
  } else if (key == "sigma_sq") {
    c.sigma_sq = to_auto_double(key, value, "none");
  } else if (key == "delta0") {
    c.delta0 = to_auto_double(key, value, "none");
  } else if (key == "threads") {
    c.threads = to_u64(key, value);
  } else if (key == "trace") {
    c.trace_path = value == "none" ? "" : value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

void apply_settings(RunConfig& config, const Settings& settings) {
  for (const auto& [k, v] : settings) apply_setting(config, k, v);
}

Settings effective_settings(const RunConfig& c) {
  Settings s;
  auto add = [&s](const char* k, std::string v) { s.emplace_back(k, std::move(v)); };
  add("algorithm", to_string(c.algorithm));
  add("n", std::to_string(c.n));
  add("f", std::to_string(c.f));
  add("seed", std::to_string(c.seed));
  add("rounds", std::to_string(c.rounds));
  add("epochs", opt_double(c.epochs, "none"));
  add("gamma", opt_double(c.gamma, "auto"));
  add("eta", opt_double(c.eta, "auto"));
  add("batch_size", c.batch_size == kFullBatch ? "full" : std::to_string(c.batch_size));
  add("compressor", to_string(c.compressor.kind));
  add("k", std::to_string(c.compressor.k));
  add("alpha", opt_double(c.compressor.alpha, "auto"));
  add("aggregator", to_string(c.aggregator.rule));
  add("nnm", c.aggregator.use_nnm ? "true" : "false");
  add("rfa_iterations", std::to_string(c.aggregator.rfa_iterations));
  add("rfa_smoothing", format_double(c.aggregator.rfa_smoothing));
  add("attack", to_string(c.attack.kind));
  add("epsilon", format_double(c.attack.epsilon));
  add("z", opt_double(c.attack.z, "auto"));
  add("attack_k", c.attack.k ? std::to_string(c.attack.k) : "auto");
  add("eval_every", std::to_string(c.eval_every));
  add("dataset", c.data.path);
  add("dim", c.data.dim ? std::to_string(c.data.dim) : "auto");
  add("normalize", c.data.normalize ? "true" : "false");
  add("partition", c.data.partition == PartitionKind::Uniform ? "uniform" : "label_sorted");
  add("synthetic_examples", std::to_string(c.data.synthetic_examples));
  add("synthetic_dim", std::to_string(c.data.synthetic_dim));
  add("synthetic_separation", format_double(c.data.synthetic_separation));
  add("lambda", opt_double(c.lambda, "auto"));
  add("value_bits", std::to_string(c.value_bits));
  add("byz_init", c.byz_init_attack ? "attack" : "zero");
  add("kappa", opt_double(c.kappa, "none"));
  add("sigma_sq", opt_double(c.sigma_sq, "none"));
  add("delta0", opt_double(c.delta0, "none"));
  add("threads", std::to_string(c.threads));
  add("trace", c.trace_path.empty() ? "none" : c.trace_path);
  return s;
}

void write_manifest(std::ostream& out, const RunConfig& config, std::uint64_t data_hash,
                    const RunResult& result) {
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(data_hash));
  out << "# byzef run manifest\n";
  out << "# dataset_hash=" << hash << '\n';
  out << "# resolved_gamma=" << format_double(result.gamma) << '\n';
  out << "# resolved_eta=" << format_double(result.eta) << '\n';
  out << "# resolved_rounds=" << result.rounds << '\n';
  out << "# rounds_completed=" << result.rounds_completed << '\n';
  out << "# status=" << (result.status == RunStatus::Completed ? "completed" : "diverged") << '\n';
  for (const auto& [k, v] : effective_settings(config)) out << k << '=' << v << '\n';
  if (!out) throw IoError("write_manifest: stream failure");
}

}  // namespace byzef

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "byzef/engine.hpp"

namespace byzef {

/// Flat key=value settings in file order. '#' starts a comment line.
using Settings = std::vector<std::pair<std::string, std::string>>;

Settings parse_settings(std::istream& in);
Settings load_settings(const std::string& path);

/// "key=value" -> {key, value}; throws ConfigError when there is no '='.
std::pair<std::string, std::string> split_override(const std::string& text);

/// Applies one setting. Unknown keys and malformed values throw ConfigError
/// naming the key.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
void apply_settings(RunConfig& config, const Settings& settings);

/// Every run key with its effective value, in a fixed order. Feeding the
/// output back through apply_settings reproduces `config` exactly.
Settings effective_settings(const RunConfig& config);

/// Manifest: '#' header lines (dataset hash, resolved step size, status),
/// then effective_settings as key=value lines.
void write_manifest(std::ostream& out, const RunConfig& config, std::uint64_t data_hash,
                    const RunResult& result);

std::string format_double(double v);

}  // namespace byzef

#pragma once

// Batch driver: configuration, solve / study / verify / dump commands.

#include "heavyflow/diagnostics.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace heavyflow {

/// Error in the configuration; the command exits with status 1.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Flat "section.key" -> value table with defaults for every known key.
struct ConfigTable {
  std::map<std::string, std::string> values;

  static const std::vector<std::pair<std::string, std::string>>& defaults();
  static ConfigTable with_defaults();
  /// Merge an INI file ([section] then key = value). Unknown keys are errors.
  void load_ini(const std::string& path);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  /// Digest of every semantic key (output directory and thread count excluded).
  std::string fingerprint() const;
};

struct RunConfig {
  GridSpec grid;
  ModelParams params;               // params.m is the single-run mass
  std::vector<double> masses;       // study sweep
  std::string force_preset;
  double amplitude = 1.0;
  std::string force_file;
  LoopOptions loop;
  bool calibrate_cf = true, calibrate_e = true;
  AdmissibleBounds bounds;
  std::string output_dir;
  bool strict = false;
  std::uint64_t seed = 1;
  int threads = 0;
  bool probes = true;
  bool reference = false;
  bool checkpoint = true;
  std::string fingerprint;

  /// Typed view of the table. Throws ConfigError naming the offending key;
  /// gamma, p and m are checked here (gamma > 1, 3 < p < 6, m > 0).
  static RunConfig from(const ConfigTable& table);
};

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_study(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_verify(std::uint64_t seed, const std::string& fault, std::ostream& out);
int cmd_dump(const std::string& field_path, const std::string& csv_path, std::ostream& out, std::ostream& err);

/// Entry point of the heavyflow executable.
int run_cli(int argc, char** argv);

} // namespace heavyflow

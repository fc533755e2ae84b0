#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace radnls::cli {

enum class Scenario { groundstate, evolve, dispersive, sweep, virial_check };

std::optional<Scenario> parse_scenario(const std::string& s);
std::string to_string(Scenario s);

struct DataProfile {
  std::string kind = "ground_state"; // gaussian | ground_state | file
  double amplitude = 1.0;
  double width = 1.0;
  double scale = 0.9;
  std::string path;
  double perturbation = 0.0; // seeded smooth perturbation, relative to max |u0|
};

struct ExperimentConfig {
  Scenario scenario = Scenario::groundstate;
  int d = 3;
  double a = 0.0;
  double p = 3.0;
  double R_max = 64.0;
  int N = 512;
  std::optional<double> dt;
  double T = 10.0;
  int sample_every = 10;
  DataProfile data;
  double R_loc = 10.0;
  std::vector<double> morawetz_R_list;
  std::vector<double> morawetz_T_list;
  std::string out_dir = "out";
  std::vector<std::string> formats{"csv", "json"};
  std::uint64_t seed = 0;
  int workers = 1;
  std::string groundstate_mode = "galerkin";
  std::vector<double> sweep_a;
  std::vector<double> sweep_p;
  std::vector<double> dispersive_t{1.0, 2.0, 4.0, 8.0};
  double dispersive_bound = 2.0;
  double virial_t0 = 0.0;
  double virial_t1 = 1.0;
  double truncated_R = 0.0;
};

struct Finding {
  std::string field;
  std::string reason;
};

/// Thrown for documents that cannot be parsed; what() carries the location.
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Reads the INI-style document: optional [section] headers, key = value lines,
/// '#' or ';' comments. Keys are section.key. Unknown keys become findings.
struct ParsedConfig {
  ExperimentConfig config;
  std::vector<Finding> findings;
  bool scenario_given = false;
};
ParsedConfig parse_config(const std::string& text);
ParsedConfig load_config(const std::filesystem::path& path);

/// Schema and admissibility findings; empty iff runnable.
std::vector<Finding> validate(const ExperimentConfig& cfg);

/// Every field with its effective value, one key = value per line, sorted.
std::string canonical(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of the canonical form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct RunResult {
  int exit_code = 0; // 0 ok, 3 blowup breach
  std::string status; // "ok" or "blowup-breach"
  std::vector<std::filesystem::path> files;
  std::string summary;
};

/// Runs a validated config. Throws UsageError if validate() is not empty.
RunResult run(const ExperimentConfig& cfg);

} // namespace radnls::cli

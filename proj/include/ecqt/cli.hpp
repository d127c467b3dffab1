#ifndef ECQT_CLI_HPP
#define ECQT_CLI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecqt/echam.hpp"
#include "ecqt/integrator.hpp"
#include "ecqt/phases.hpp"

namespace ecqt {

// Front end: verbs simulate, scan, reformulate, circuit, classify,
// oracle. Every output lands inside the declared output directory, and
// for the text formats reruns of the same (config, seed) are
// byte-identical.

inline constexpr const char* kCliVersion = "ecqt-1.0.0";

enum class OutputFormat { Csv, Json, BinaryHistory };

struct RunConfig {
  std::string verb;
  nlohmann::json config;
  std::string config_digest;  // fnv1a of the raw config bytes
  std::string out_dir;
  OutputFormat format = OutputFormat::Csv;
  int workers = 1;
  std::uint64_t seed = 0;
  std::string units;  // required banner; times are inverse energies, hbar = 1
};

struct SweepAxis {
  std::string name;
  int term = -1;  // coupling index; -1 scales every memory distance
  std::vector<Real> values;
};

struct SweepCell {
  std::vector<Real> coords;
  PhaseLabel label;
  PhaseFeatures features;
  std::string digest;  // fnv1a of the cell's trajectory table
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<SweepCell> cells;  // row-major over the axes grid
  std::string config_digest;
  std::string code_version;
};

// Parses a config file; parse failures surface as ConfigError carrying
// the line and column of the offending byte.
nlohmann::json load_config_file(const std::string& path);

// Matrices are rows of [re, im] pairs, state vectors flat lists of
// [re, im]; a spec is {"dim", optional "sqt", "terms": [{"parity",
// "coupling", "factors"}]}.
Mat config_matrix(const nlohmann::json& j);
Vec config_vector(const nlohmann::json& j);
ECHamiltonianSpec spec_from_json(const nlohmann::json& j);
IntegratorConfig integrator_from_json(const nlohmann::json& j);

// Trajectory table with a dimensionless tau = t / a_ref column when
// a_ref > 0; otherwise the same layout as trajectory_save_csv.
std::string trajectory_csv(const Trajectory& traj, Real a_ref);

// Verb drivers. Each validates its config section fully before any
// compute and writes only under cfg.out_dir.
void run_simulate(const RunConfig& cfg);
SweepResult run_scan(const RunConfig& cfg);
void run_reformulate(const RunConfig& cfg);
void run_circuit(const RunConfig& cfg);
void run_classify(const RunConfig& cfg);
void run_oracle(const RunConfig& cfg);

// In-process entry point; args exclude the program name. Returns the
// process exit code: 0 ok, 2 config or schema error, 3 numeric failure,
// 4 resource budget. When error is non-null the failure message is
// stored there as well as printed.
int run_cli(const std::vector<std::string>& args,
            std::string* error = nullptr);

}  // namespace ecqt

#endif

#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msle/core.hpp"

namespace msle {

/// Invalid experiment configuration; `field` names the offending key.
class ConfigError : public InputError {
 public:
  ConfigError(std::string field_name, const std::string& what)
      : InputError("config field '" + field_name + "': " + what), field(std::move(field_name)) {}
  std::string field;
};

enum class CheckKind {
  zip,
  hcap,
  bpz,
  kz,
  commutator,
  schemes,
  martingale,
  girsanov,
  inverse,
  coupling_pde,
  coupling_mc,
  crossvar
};

const char* to_string(CheckKind kind);

struct ExperimentConfig {
  CheckKind check = CheckKind::bpz;
  Mode mode = Mode::backward;
  std::optional<double> kappa;
  std::optional<double> gamma;
  std::optional<double> chi;
  std::vector<double> points;
  std::optional<std::size_t> i_index;  // 1-based, as written in the file
  std::optional<std::size_t> j_index;
  std::optional<double> t_final;
  std::optional<double> dt;
  std::optional<std::size_t> n_paths;
  std::uint64_t seed = 0;
  std::optional<double> eps_tilde;
  std::optional<double> c;
  std::optional<double> fd_step;
  std::vector<std::complex<double>> bulk_points;
  std::optional<double> bound_n;
  std::optional<std::vector<int>> epsilon_signs;
  std::optional<std::size_t> workers;
  std::string out_path = "out";
  nlohmann::ordered_json raw;  // the parsed document, echoed into report headers
};

/// Validates field types, finiteness, dt < t_final and the fields each check
/// needs. Throws ConfigError naming the first bad field.
ExperimentConfig parse_config(const nlohmann::ordered_json& doc);

struct CheckReport {
  std::string check;
  std::vector<McReport> rows;
  nlohmann::ordered_json extra;  // per-check diagnostics (discard counts, ESS)
};

CheckReport run_check(const ExperimentConfig& cfg);

bool all_pass(const CheckReport& report);

/// CSV with columns check,name,estimate,std_error,reference,tolerance,n_samples,pass.
std::string report_csv(const CheckReport& report);
nlohmann::ordered_json report_json(const CheckReport& report, const ExperimentConfig& cfg);

/// Exit codes of the command line front end.
enum ExitCode : int { exit_pass = 0, exit_failed_row = 1, exit_config = 2, exit_numerical = 3 };

/// `check`: runs one config and writes <stem>.csv and <stem>.json under the
/// output directory. Diagnostics go to `err`.
int run_config_file(const std::filesystem::path& config_path,
                    const std::optional<std::filesystem::path>& out_dir, std::ostream& err);

/// `sweep`: Cartesian product over array-valued kappa, points and eps_tilde;
/// one report pair per cell plus summary.csv.
int run_sweep_file(const std::filesystem::path& config_path,
                   const std::optional<std::filesystem::path>& out_dir, std::ostream& err);

}  // namespace msle

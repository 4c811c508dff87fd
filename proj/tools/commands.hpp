#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pmflow::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIntegrationFailure = 3,
  kInvariantViolation = 4,
  kInadmissible = 5,
};

/// Options shared by every subcommand. Unset optionals take the
/// subcommand's default.
struct RunConfig {
  std::string model = "log";
  std::optional<std::string> bc;
  std::size_t n = 0;
  std::vector<std::size_t> ns;
  double sigma0 = 0.5;
  std::optional<double> lambda0;
  std::optional<double> Lambda0;
  double t_end = 1.0;
  int samples = 101;
  std::optional<double> rtol;
  std::optional<double> atol;
  std::optional<std::string> method;
  double c_step = 2.0;
  std::string datum;
  std::string file;
  std::filesystem::path out = "pmflow_out";
  std::uint64_t seed = 20240601;
  std::size_t n_ref = 4096;
  bool odd_reflection = false;
  std::vector<double> probes;
  std::string inject_fault;
  /// Number of draws per randomized selftest suite.
  int trials = 0;
};

/// Reads a flat JSON object whose keys are the long flag names ("t-end" and
/// "t_end" are both accepted). Throws ConfigError on unknown keys, nested
/// values or type mismatches.
RunConfig load_config(const std::filesystem::path& path);
/// Applies `text` on top of `base`.
RunConfig merge_config_json(RunConfig base, const std::string& text);

int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_counterexample(const RunConfig& config, std::ostream& log);
int cmd_converge(const RunConfig& config, std::ostream& log);
int cmd_selftest(const RunConfig& config, std::ostream& log);

/// Parses argv, merges the config file and dispatches. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pmflow::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace semalloc::cli {

inline constexpr std::string_view kToolVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitIo = 3 };

// Bad flag values that the argument parser cannot catch by itself.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AllocateArgs {
  std::optional<std::filesystem::path> config;
  double p_bar = 0.0;
  std::string method = "bisection";  // or "all"
  std::uint64_t seed = 1;
  std::optional<std::vector<double>> fixed_gains;  // small-scale |h~_i|^2
  std::optional<std::filesystem::path> csv;
};

struct ExperimentArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> name;
  std::filesystem::path out_dir = "results";
  std::optional<std::uint64_t> seed;
};

struct ValidateArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> suite;
};

// Each command reports to `out`/`err` and returns an ExitCode.
int cmd_allocate(const AllocateArgs& args, std::ostream& out, std::ostream& err);
int cmd_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err);

// Parses "g1,g2,..." into positive finite numbers; throws UsageError.
std::vector<double> parse_gain_list(std::string_view text);

std::string sha256_hex(std::string_view data);

std::filesystem::path default_config_path();

}  // namespace semalloc::cli

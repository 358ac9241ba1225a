#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "semalloc/alloc.hpp"
#include "semalloc/link.hpp"
#include "semalloc/perception.hpp"
#include "semalloc/simkit.hpp"

namespace semalloc::cli {

// Malformed or invalid configuration. Messages start with a JSON path such
// as "$.experiments[1].p_bar_grid".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigDocument {
  Metric metric = Metric::Clip;
  Scheme scheme = Scheme::CodedDiscard;
  double max_ber = kMaxBer;
  std::vector<StreamProfile> streams = default_streams();
  link::ChannelParams channel;
  std::array<MetricPreset, 2> presets{clip_preset(), msssim_preset()};
  AllocOptions alloc;
  std::vector<sim::ExperimentSpec> experiments;

  // Throws ConfigError.
  void validate() const;
  sim::SimContext context() const;
  PerceptionModel model() const;
  // Throws ConfigError when no experiment has that name.
  const sim::ExperimentSpec& experiment(std::string_view name) const;
};

// Built-in defaults without experiment blocks.
ConfigDocument default_config();

// Throws ConfigError.
ConfigDocument parse_config(std::string_view json_text);
// Throws IoError or ConfigError.
ConfigDocument load_config(const std::filesystem::path& path);
// Pretty-printed JSON that parse_config reads back to an equal document.
std::string serialize_config(const ConfigDocument& doc);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace semalloc::cli

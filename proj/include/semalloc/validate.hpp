#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semalloc/config.hpp"

namespace semalloc::cli {

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::size_t checks = 0;
  // Largest residual divided by its tolerance; <= 1 means every check passed.
  double max_residual = 0.0;
  std::string worst_check;
};

// "info", "link", "lambertw", "perception", "linksim".
const std::vector<std::string_view>& suite_names();

// Throws ConfigError for an unknown suite name.
SuiteResult run_suite(std::string_view name, const ConfigDocument& doc);
std::vector<SuiteResult> run_suites(const ConfigDocument& doc,
                                    std::optional<std::string_view> only = std::nullopt);

}  // namespace semalloc::cli

#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace vropt {

struct CheckResult {
  std::string id;
  int criterion = 0;
  std::string title;
  bool passed = false;
  double observed = 0.0;
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

struct ValidateOptions {
  /// Check ids to run; empty runs all.
  std::vector<std::string> only;
  /// Fault to inject: "" or "saga-covariate-sign".
  std::string inject_fault;
  /// Reference-solution cache directory.
  std::optional<std::string> cache_dir;
  /// Dataset argument for the mushrooms-scale checks (see load_dataset).
  std::string mushrooms = "mushrooms";
  /// Progress messages, one line per finished check.
  std::ostream* log = nullptr;
};

struct CheckInfo {
  std::string id;
  int criterion;
  std::string title;
};

/// All checks in criterion order.
const std::vector<CheckInfo>& validation_checks();

/// Runs the selected checks. Throws ConfigError for unknown ids or faults.
std::vector<CheckResult> run_validation(const ValidateOptions& options);

}  // namespace vropt

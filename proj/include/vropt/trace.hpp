#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vropt {

/// One checkpoint of a run.
struct TraceRecord {
  double epoch = 0.0;  ///< grad_evals / n
  std::uint64_t grad_evals = 0;
  double f = 0.0;
  std::optional<double> subopt;
  std::optional<double> grad_norm;
  std::optional<double> var_est;
  std::optional<double> gap;
  std::optional<double> time_s;
  /// ||gbar + lambda x|| for table methods; kept in memory only.
  std::optional<double> gbar_norm;
};

using Trace = std::vector<TraceRecord>;

inline constexpr const char* kTraceHeader = "epoch,grad_evals,f,subopt,grad_norm,var_est,gap,time_s";

/// Writes "# key=value" metadata lines, then the header and one row per
/// record. Floats use 17 significant digits; absent values are empty cells.
void write_trace(std::ostream& out, const Trace& trace,
                 const std::vector<std::pair<std::string, std::string>>& metadata = {});
/// Inverse of write_trace; skips lines starting with '#'.
Trace read_trace(std::istream& in);

enum class StopKind { Epochs, GradNorm, GbarNorm, Gap };

struct StopRule {
  StopKind kind = StopKind::Epochs;
  double eps = 0.0;
};

/// Parses "grad:EPS", "gbar:EPS", "gap:EPS" or "epochs".
StopRule parse_stop_rule(const std::string& text);
std::string to_string(const StopRule& rule);

/// True when the rule is met at this record. Throws ConfigError when the
/// metric the rule needs is absent from the record. The epochs rule never
/// stops early (the budget is enforced by the run driver).
bool should_stop(const StopRule& rule, const TraceRecord& record);

struct RateFit {
  bool ok = false;
  double rho_hat = 0.0;
  double c_hat = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
  std::string message;
};

/// Least-squares fit of log(subopt) against k = grad_evals / evals_per_iter
/// over the records after `burn_in` epochs. Points with subopt <= 1e-15 end
/// the fitted window. rho_hat = 1 - exp(slope), c_hat = exp(intercept).
RateFit fit_linear_rate(const Trace& trace, double burn_in, double evals_per_iter = 1.0);

/// Formats with 17 significant digits.
std::string format_double(double v);

}  // namespace vropt

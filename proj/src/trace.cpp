#include "vropt/trace.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "vropt/data.hpp"
#include "vropt/objective.hpp"

namespace vropt {

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_cell(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    // from_chars rejects "inf"/"nan" spellings produced by some writers
    try {
      std::size_t pos = 0;
      v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ParseError("trace line " + std::to_string(line) + ": bad number '" + s + "'");
    }
  }
  return v;
}

}  // namespace

void write_trace(std::ostream& out, const Trace& trace,
                 const std::vector<std::pair<std::string, std::string>>& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << '=' << value << '\n';
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << format_double(r.epoch) << ',' << r.grad_evals << ',' << format_double(r.f) << ',' << cell(r.subopt)
        << ',' << cell(r.grad_norm) << ',' << cell(r.var_est) << ',' << cell(r.gap) << ',' << cell(r.time_s)
        << '\n';
  }
  if (!out) throw std::ios_base::failure("failed writing trace");
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kTraceHeader) throw ParseError("trace line " + std::to_string(lineno) + ": unexpected header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) throw ParseError("trace line " + std::to_string(lineno) + ": expected 8 cells");
    TraceRecord r;
    r.epoch = parse_cell(cells[0], lineno).value_or(0.0);
    r.grad_evals = std::stoull(cells[1]);
    r.f = parse_cell(cells[2], lineno).value_or(0.0);
    r.subopt = parse_cell(cells[3], lineno);
    r.grad_norm = parse_cell(cells[4], lineno);
    r.var_est = parse_cell(cells[5], lineno);
    r.gap = parse_cell(cells[6], lineno);
    r.time_s = parse_cell(cells[7], lineno);
    trace.push_back(r);
  }
  if (!header_seen) throw ParseError("trace: missing header");
  return trace;
}

StopRule parse_stop_rule(const std::string& text) {
  if (text == "epochs") return {};
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("bad stop rule '" + text + "' (use grad:EPS, gbar:EPS, gap:EPS or epochs)");
  const std::string kind = text.substr(0, colon);
  double eps = 0.0;
  try {
    eps = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad stop tolerance in '" + text + "'");
  }
  if (!(eps > 0.0)) throw ConfigError("stop tolerance must be > 0");
  if (kind == "grad") return {StopKind::GradNorm, eps};
  if (kind == "gbar") return {StopKind::GbarNorm, eps};
  if (kind == "gap") return {StopKind::Gap, eps};
  throw ConfigError("bad stop rule '" + text + "' (use grad:EPS, gbar:EPS, gap:EPS or epochs)");
}

std::string to_string(const StopRule& rule) {
  switch (rule.kind) {
    case StopKind::Epochs: return "epochs";
    case StopKind::GradNorm: return "grad:" + format_double(rule.eps);
    case StopKind::GbarNorm: return "gbar:" + format_double(rule.eps);
    case StopKind::Gap: return "gap:" + format_double(rule.eps);
  }
  return "epochs";
}

bool should_stop(const StopRule& rule, const TraceRecord& record) {
  auto need = [](const std::optional<double>& v, const char* what) {
    if (!v) throw ConfigError(std::string("stop rule needs ") + what + ", which this run does not record");
    return *v;
  };
  switch (rule.kind) {
    case StopKind::Epochs: return false;
    case StopKind::GradNorm: return need(record.grad_norm, "the gradient norm") <= rule.eps;
    case StopKind::GbarNorm: return need(record.gbar_norm, "the average-gradient norm") <= rule.eps;
    case StopKind::Gap: return need(record.gap, "the duality gap") <= rule.eps;
  }
  return false;
}

RateFit fit_linear_rate(const Trace& trace, double burn_in, double evals_per_iter) {
  RateFit fit;
  if (!(evals_per_iter > 0.0)) throw ConfigError("fit_linear_rate: evals_per_iter must be > 0");
  std::vector<double> ks;
  std::vector<double> ys;
  for (const auto& r : trace) {
    if (r.epoch < burn_in) continue;
    if (!r.subopt) continue;
    if (*r.subopt <= 1e-15) break;
    ks.push_back(static_cast<double>(r.grad_evals) / evals_per_iter);
    ys.push_back(std::log(*r.subopt));
  }
  fit.points = ks.size();
  if (ks.size() < 5) {
    fit.message = "need at least 5 checkpoints with subopt > 1e-15 after burn-in, have " + std::to_string(ks.size());
    return fit;
  }
  const double m = static_cast<double>(ks.size());
  double kbar = 0.0;
  double ybar = 0.0;
  for (std::size_t t = 0; t < ks.size(); ++t) {
    kbar += ks[t];
    ybar += ys[t];
  }
  kbar /= m;
  ybar /= m;
  double skk = 0.0;
  double sky = 0.0;
  double syy = 0.0;
  for (std::size_t t = 0; t < ks.size(); ++t) {
    skk += (ks[t] - kbar) * (ks[t] - kbar);
    sky += (ks[t] - kbar) * (ys[t] - ybar);
    syy += (ys[t] - ybar) * (ys[t] - ybar);
  }
  if (skk == 0.0) {
    fit.message = "checkpoints share a single iteration count";
    return fit;
  }
  const double slope = sky / skk;
  const double intercept = ybar - slope * kbar;
  double sse = 0.0;
  for (std::size_t t = 0; t < ks.size(); ++t) {
    const double e = ys[t] - (intercept + slope * ks[t]);
    sse += e * e;
  }
  fit.rho_hat = -std::expm1(slope);
  fit.c_hat = std::exp(intercept);
  fit.r2 = syy == 0.0 ? 1.0 : 1.0 - sse / syy;
  if (slope > 0.0) {
    fit.message = "suboptimality increases; no linear rate";
    return fit;
  }
  fit.ok = true;
  return fit;
}

}  // namespace vropt

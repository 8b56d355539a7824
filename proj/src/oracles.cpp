#include "vropt/oracles.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vropt/trace.hpp"

namespace vropt {

static_assert(std::endian::native == std::endian::little, "matrix files assume a little-endian host");

Vector fd_grad(const GlmObjective& obj, const Vector& x, double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const double fp = obj.full_value(probe);
    probe[j] = x[j] - h;
    const double fm = obj.full_value(probe);
    probe[j] = x[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

namespace {

constexpr std::size_t kEnumLimit = 100000;

}  // namespace

EnumStats enum_stats(std::size_t n, const std::function<Vector(std::size_t)>& estimator, std::span<const double> probs) {
  if (n == 0) throw std::invalid_argument("enum_stats: n must be >= 1");
  if (n > kEnumLimit) throw std::invalid_argument("enum_stats: n exceeds the enumeration limit of 1e5");
  if (!probs.empty() && probs.size() != n) throw DimensionError("enum_stats: probability vector has wrong length");
  auto p = [&](std::size_t i) { return probs.empty() ? 1.0 / static_cast<double>(n) : probs[i]; };
  EnumStats s;
  s.count = n;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector g = estimator(i);
    if (s.mean.size() == 0) s.mean = Vector::Zero(g.size());
    s.mean += p(i) * g;
    s.second_moment += p(i) * g.squaredNorm();
  }
  for (std::size_t i = 0; i < n; ++i) s.variance += p(i) * (estimator(i) - s.mean).squaredNorm();
  return s;
}

EnumStats enum_stats_batches(std::size_t n, std::size_t b, const std::function<Vector(IndexSpan)>& estimator) {
  if (b < 1 || b > n) throw std::invalid_argument("enum_stats_batches: need 1 <= b <= n");
  double count = 1.0;
  for (std::size_t k = 0; k < b; ++k) count = count * static_cast<double>(n - k) / static_cast<double>(k + 1);
  if (count > 1e6) throw std::invalid_argument("enum_stats_batches: more than 1e6 subsets");

  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::size_t> c(b);
  for (std::size_t k = 0; k < b; ++k) c[k] = k;
  while (true) {
    subsets.push_back(c);
    std::size_t k = b;
    while (k > 0 && c[k - 1] == n - b + (k - 1)) --k;
    if (k == 0) break;
    ++c[k - 1];
    for (std::size_t t = k; t < b; ++t) c[t] = c[t - 1] + 1;
  }
  const double w = 1.0 / static_cast<double>(subsets.size());
  EnumStats s;
  s.count = subsets.size();
  for (const auto& sub : subsets) {
    const Vector g = estimator(sub);
    if (s.mean.size() == 0) s.mean = Vector::Zero(g.size());
    s.mean += w * g;
    s.second_moment += w * g.squaredNorm();
  }
  for (const auto& sub : subsets) s.variance += w * (estimator(sub) - s.mean).squaredNorm();
  return s;
}

bool lemma2_holds(const EnumStats& stats) {
  return stats.variance <= stats.second_moment * (1.0 + 1e-12) + 1e-300;
}

namespace {

double l_max_of(const GlmObjective& obj) {
  const double m = loss_curvature_bound(obj.loss());
  double best = 0.0;
  for (std::size_t i = 0; i < obj.n(); ++i) best = std::max(best, row_norm_sq(obj.data().row(i)));
  return m * best + obj.l2();
}

double loss_second_deriv(LossKind loss, double margin, double label) {
  switch (loss) {
    case LossKind::HalfSquared: return 1.0;
    case LossKind::Logistic: {
      const double t = label * margin;
      const double e = std::exp(-std::abs(t));
      return e / ((1.0 + e) * (1.0 + e));
    }
    case LossKind::Hinge: throw NonSmoothLossError();
  }
  return 0.0;
}

}  // namespace

InequalityCheck check_lemma1(const GlmObjective& obj, const Vector& x, const Vector& x_star) {
  const double lmax = l_max_of(obj);
  double lhs = 0.0;
  for (std::size_t i = 0; i < obj.n(); ++i) lhs += (obj.grad_i(i, x) - obj.grad_i(i, x_star)).squaredNorm();
  lhs /= static_cast<double>(obj.n());
  InequalityCheck c;
  c.lhs = lhs;
  c.rhs = 2.0 * lmax * (obj.full_value(x) - obj.full_value(x_star));
  c.holds = c.lhs <= c.rhs + 1e-12 * (1.0 + std::abs(c.rhs));
  return c;
}

InequalityCheck check_contraction(const GlmObjective& obj, const Vector& x, const Vector& x_star, double gamma) {
  const double mu = obj.l2();
  if (!(mu > 0.0)) throw ConfigError("contraction check needs l2 > 0");
  const double lmax = l_max_of(obj);
  if (!(gamma > 0.0) || gamma > 1.0 / lmax) {
    throw ConfigError("contraction check needs 0 < gamma <= 1/L_max = " + format_double(1.0 / lmax));
  }
  const StarTable star = StarTable::build(obj, x_star);
  double lhs = 0.0;
  for (std::size_t i = 0; i < obj.n(); ++i) {
    const std::size_t idx[] = {i};
    const Vector next = x - gamma * sgd_star_estimate(obj, star, x, idx);
    lhs += (next - x_star).squaredNorm();
  }
  lhs /= static_cast<double>(obj.n());
  InequalityCheck c;
  c.lhs = lhs;
  c.rhs = (1.0 - gamma * mu) * (x - x_star).squaredNorm();
  c.holds = c.lhs <= c.rhs * (1.0 + 1e-12);
  return c;
}

double duality_gap(const GlmObjective& obj, const DualState& dual) {
  const double d = dual_objective(obj, dual);
  if (!std::isfinite(d)) return kInfinity;
  const Vector w = dual.recompute_primal(obj);
  return obj.full_value(w) - d;
}

double reference_residual(const GlmObjective& obj, const Vector& x, double l_full) {
  const Vector g = obj.full_grad(x);
  if (obj.l1() == 0.0) return g.norm();
  const double step = 1.0 / l_full;
  return (x - obj.prox(step, x - step * g)).norm() * l_full;
}

namespace {

// Newton iterations on the smooth objective; returns true when the residual
// reaches tol.
bool newton_polish(const GlmObjective& obj, Vector& x, double tol, double& residual) {
  const auto d = static_cast<Eigen::Index>(obj.d());
  for (int it = 0; it < 50; ++it) {
    const Vector g = obj.full_grad(x);
    residual = g.norm();
    if (residual <= tol) return true;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < obj.n(); ++i) {
      const auto& row = obj.data().row(i);
      const double c = loss_second_deriv(obj.loss(), dot(row, x), obj.label(i)) / static_cast<double>(obj.n());
      const auto idx = row.indices();
      const auto val = row.values();
      for (std::size_t p = 0; p < idx.size(); ++p) {
        for (std::size_t q = 0; q < idx.size(); ++q) h(idx[p], idx[q]) += c * val[p] * val[q];
      }
    }
    h.diagonal().array() += obj.l2();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    const Vector step = ldlt.solve(g);
    if (!step.allFinite()) return false;
    const Vector trial = x - step;
    const double trial_res = obj.full_grad(trial).norm();
    if (!(trial_res < residual)) return false;
    x = trial;
  }
  residual = obj.full_grad(x).norm();
  return residual <= tol;
}

}  // namespace

ReferenceSolution solve_reference(const GlmObjective& obj, double tol, std::size_t max_iter) {
  if (!is_smooth(obj.loss())) throw ConfigError("reference solver needs a smooth loss; use sdca for hinge");
  const SmoothnessInfo info = obj.smoothness();
  const double lip = info.l_full;
  const double step = 1.0 / lip;
  const bool newton_ok = obj.l1() == 0.0 && obj.d() <= 2000;

  ReferenceSolution sol;
  Vector x = Vector::Zero(static_cast<Eigen::Index>(obj.d()));
  Vector y = x;
  double t = 1.0;
  bool polished = false;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const Vector g = obj.full_grad(y);
    const Vector x_new = obj.prox(step, y - step * g);
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if ((y - x_new).dot(x_new - x) > 0.0) {
      t = 1.0;
      y = x_new;
    } else {
      y = x_new + ((t - 1.0) / t_new) * (x_new - x);
      t = t_new;
    }
    x = x_new;
    sol.iterations = it;
    if (it % 10 != 0) continue;
    sol.residual = reference_residual(obj, x, lip);
    if (sol.residual <= tol) break;
    if (newton_ok && !polished && sol.residual <= 1e-6) {
      Vector xn = x;
      double res = 0.0;
      polished = true;
      if (newton_polish(obj, xn, tol, res) || res < sol.residual) {
        x = xn;
        y = xn;
        t = 1.0;
        sol.residual = res;
        if (res <= tol) break;
      }
    }
  }
  if (!(sol.residual <= tol)) {
    throw std::runtime_error("reference solver hit the iteration cap (" + std::to_string(max_iter) +
                             ") with residual " + format_double(sol.residual));
  }
  sol.x = x;
  sol.f = obj.composite_value(x);
  return sol;
}

void write_matrix_file(const std::string& path, const RowMatrix& m) {
  std::ostringstream out;
  out.write("VRX1", 4);
  const auto rows = static_cast<std::uint32_t>(m.rows());
  const auto cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  write_text_file_atomic(path, out.str());
}

RowMatrix read_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  char magic[4];
  std::uint32_t rows = 0;
  std::uint64_t cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || std::memcmp(magic, "VRX1", 4) != 0) throw ParseError(path + ": not a vector file (bad header)");
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw ParseError(path + ": truncated vector file");
  return m;
}

void write_vector_file(const std::string& path, const Vector& v) {
  RowMatrix m(1, v.size());
  m.row(0) = v.transpose();
  write_matrix_file(path, m);
}

Vector read_vector_file(const std::string& path) {
  const RowMatrix m = read_matrix_file(path);
  if (m.rows() != 1) throw ParseError(path + ": expected a single vector (rows = 1)");
  return m.row(0).transpose();
}

void write_text_file_atomic(const std::string& path, const std::string& text) {
  static std::atomic<std::uint64_t> counter{0};
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1)) + "_" +
         std::to_string(std::hash<std::string>{}(path) & 0xffff);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::ios_base::failure("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::ios_base::failure("cannot rename onto " + path + ": " + ec.message());
  }
}

std::string reference_cache_key(const GlmObjective& obj) {
  std::ostringstream key;
  key << std::hex << std::setfill('0') << std::setw(16) << obj.data().content_hash() << '_' << to_string(obj.loss())
      << '_' << std::setw(16) << std::bit_cast<std::uint64_t>(obj.l2()) << '_' << std::setw(16)
      << std::bit_cast<std::uint64_t>(obj.l1());
  return key.str();
}

ReferenceSolution load_or_solve_reference(const GlmObjective& obj, const std::optional<std::string>& cache_dir,
                                          double tol) {
  namespace fs = std::filesystem;
  if (cache_dir) {
    const fs::path base = fs::path(*cache_dir) / reference_cache_key(obj);
    const fs::path xfile = fs::path(base.string() + ".xstar");
    const fs::path ffile = fs::path(base.string() + ".fstar");
    if (fs::exists(xfile) && fs::exists(ffile)) {
      ReferenceSolution sol;
      sol.x = read_vector_file(xfile.string());
      if (static_cast<std::size_t>(sol.x.size()) == obj.d()) {
        std::ifstream fin(ffile);
        fin >> sol.f;
        if (fin) {
          sol.cache_hit = true;
          sol.residual = reference_residual(obj, sol.x, obj.smoothness().l_full);
          return sol;
        }
      }
    }
    ReferenceSolution sol = solve_reference(obj, tol);
    fs::create_directories(*cache_dir);
    write_vector_file(xfile.string(), sol.x);
    write_text_file_atomic(ffile.string(), format_double(sol.f) + "\n");
    return sol;
  }
  return solve_reference(obj, tol);
}

}  // namespace vropt

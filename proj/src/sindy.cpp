#include "dsae/sindy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "dsae/io.hpp"
#include "dsae/kernels.hpp"
#include "dsae/linalg.hpp"

namespace dsae {

int Term::degree() const {
  if (kind != Kind::Monomial) return -1;
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

namespace {

// Monomials of exactly `degree` in graded lexicographic order: nondecreasing
// variable indices, earliest variable first.
void append_monomials(std::size_t dim, int degree, std::vector<Term>& out) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(degree), 0);
  while (true) {
    Term t;
    t.exponents.assign(dim, 0);
    for (std::size_t k : idx) ++t.exponents[k];
    out.push_back(std::move(t));
    // Advance to the next nondecreasing index tuple.
    std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(idx.size()) - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == dim - 1) --pos;
    if (pos < 0) return;
    const std::size_t next = idx[static_cast<std::size_t>(pos)] + 1;
    for (std::size_t k = static_cast<std::size_t>(pos); k < idx.size(); ++k) idx[k] = next;
  }
}

inline double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

}  // namespace

FeatureLibrary build_library(std::size_t dim, int max_degree, bool trig, bool include_constant) {
  if (dim < 1) throw InvalidArgument("build_library: dim must be >= 1");
  if (max_degree < 1) throw InvalidArgument("build_library: max_degree must be >= 1");
  FeatureLibrary lib{dim, max_degree, trig, include_constant, {}};
  if (include_constant) lib.terms.push_back(Term{Term::Kind::Monomial, std::vector<int>(dim, 0), 0});
  for (int d = 1; d <= max_degree; ++d) append_monomials(dim, d, lib.terms);
  if (trig) {
    for (std::size_t i = 0; i < dim; ++i) lib.terms.push_back(Term{Term::Kind::Sin, {}, i});
    for (std::size_t i = 0; i < dim; ++i) lib.terms.push_back(Term{Term::Kind::Cos, {}, i});
  }
  return lib;
}

std::vector<std::string> default_var_names(std::size_t dim, const std::string& stem) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < dim; ++i) names.push_back(stem + std::to_string(i + 1));
  return names;
}

std::string FeatureLibrary::term_name(std::size_t i, const std::vector<std::string>& vars,
                                      const char* sep) const {
  const std::vector<std::string> names = vars.empty() ? default_var_names(dim) : vars;
  const Term& t = terms.at(i);
  switch (t.kind) {
    case Term::Kind::Sin:
      return "sin(" + names[t.index] + ")";
    case Term::Kind::Cos:
      return "cos(" + names[t.index] + ")";
    case Term::Kind::Monomial:
      break;
  }
  std::string out;
  for (std::size_t k = 0; k < dim; ++k) {
    if (t.exponents[k] == 0) continue;
    if (!out.empty()) out += sep;
    out += names[k];
    if (t.exponents[k] > 1) out += "^" + std::to_string(t.exponents[k]);
  }
  return out.empty() ? "1" : out;
}

std::vector<std::string> FeatureLibrary::term_names(const std::vector<std::string>& vars) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < terms.size(); ++i) out.push_back(term_name(i, vars));
  return out;
}

void evaluate_terms(const FeatureLibrary& lib, std::span<const double> z, std::span<double> out) {
  if (z.size() != lib.dim)
    throw InvalidArgument("evaluate_library: point has dimension " + std::to_string(z.size()) +
                          ", library expects " + std::to_string(lib.dim));
  for (std::size_t i = 0; i < lib.terms.size(); ++i) {
    const Term& t = lib.terms[i];
    switch (t.kind) {
      case Term::Kind::Monomial: {
        double v = 1.0;
        for (std::size_t k = 0; k < lib.dim; ++k) v *= ipow(z[k], t.exponents[k]);
        out[i] = v;
        break;
      }
      case Term::Kind::Sin:
        out[i] = std::sin(z[t.index]);
        break;
      case Term::Kind::Cos:
        out[i] = std::cos(z[t.index]);
        break;
    }
  }
}

Matrix evaluate_library(const FeatureLibrary& lib, const Matrix& Z) {
  if (Z.cols() != lib.dim)
    throw InvalidArgument("evaluate_library: data has " + std::to_string(Z.cols()) +
                          " columns, library expects " + std::to_string(lib.dim));
  Matrix theta(Z.rows(), lib.size());
  for (std::size_t i = 0; i < Z.rows(); ++i) evaluate_terms(lib, Z.row(i), theta.row(i));
  return theta;
}

Matrix library_jacobian(const FeatureLibrary& lib, std::span<const double> z) {
  if (z.size() != lib.dim) throw InvalidArgument("library_jacobian: dimension mismatch");
  Matrix J(lib.size(), lib.dim);
  for (std::size_t i = 0; i < lib.terms.size(); ++i) {
    const Term& t = lib.terms[i];
    switch (t.kind) {
      case Term::Kind::Monomial:
        for (std::size_t j = 0; j < lib.dim; ++j) {
          if (t.exponents[j] == 0) continue;
          double v = static_cast<double>(t.exponents[j]) * ipow(z[j], t.exponents[j] - 1);
          for (std::size_t k = 0; k < lib.dim; ++k)
            if (k != j) v *= ipow(z[k], t.exponents[k]);
          J(i, j) = v;
        }
        break;
      case Term::Kind::Sin:
        J(i, t.index) = std::cos(z[t.index]);
        break;
      case Term::Kind::Cos:
        J(i, t.index) = -std::sin(z[t.index]);
        break;
    }
  }
  return J;
}

void library_vjp(const FeatureLibrary& lib, std::span<const double> z, std::span<const double> c,
                 std::span<double> gz) {
  for (std::size_t i = 0; i < lib.terms.size(); ++i) {
    const double ci = c[i];
    if (ci == 0.0) continue;
    const Term& t = lib.terms[i];
    switch (t.kind) {
      case Term::Kind::Monomial:
        for (std::size_t j = 0; j < lib.dim; ++j) {
          if (t.exponents[j] == 0) continue;
          double v = static_cast<double>(t.exponents[j]) * ipow(z[j], t.exponents[j] - 1);
          for (std::size_t k = 0; k < lib.dim; ++k)
            if (k != j) v *= ipow(z[k], t.exponents[k]);
          gz[j] += ci * v;
        }
        break;
      case Term::Kind::Sin:
        gz[t.index] += ci * std::cos(z[t.index]);
        break;
      case Term::Kind::Cos:
        gz[t.index] -= ci * std::sin(z[t.index]);
        break;
    }
  }
}

SindyModel SindyModel::zeros(FeatureLibrary lib) {
  SindyModel m;
  m.Xi = Matrix(lib.size(), lib.dim);
  m.mask.assign(lib.size() * lib.dim, true);
  m.library = std::move(lib);
  return m;
}

std::size_t SindyModel::active_terms() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void SindyModel::apply_mask() {
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (!mask[k]) Xi.data()[k] = 0.0;
}

void SindyModel::mask_from_coefficients() {
  for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = Xi.data()[k] != 0.0;
}

void SindyModel::rhs(std::span<const double> z, std::span<double> out) const {
  const std::size_t r = library.size(), m = library.dim;
  double theta_buf[64];
  std::vector<double> theta_heap;
  double* theta = theta_buf;
  if (r > 64) {
    theta_heap.resize(r);
    theta = theta_heap.data();
  }
  evaluate_terms(library, z, std::span<double>(theta, r));
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < m; ++k) out[k] += theta[i] * Xi(i, k);
}

Vector SindyModel::rhs(std::span<const double> z) const {
  Vector out(library.dim);
  rhs(z, out);
  return out;
}

StlsqResult stlsq(const Matrix& Theta, const Matrix& Zdot, const StlsqOptions& opts,
                  const std::vector<bool>* initial_mask) {
  const std::size_t q = Theta.rows(), r = Theta.cols(), m = Zdot.cols();
  if (Zdot.rows() != q)
    throw InvalidArgument("stlsq: Theta has " + std::to_string(q) + " rows, Zdot has " +
                          std::to_string(Zdot.rows()));
  if (opts.threshold < 0.0 || opts.ridge < 0.0) throw InvalidArgument("stlsq: negative threshold or ridge");
  if (initial_mask != nullptr && initial_mask->size() != r * m)
    throw InvalidArgument("stlsq: initial mask has wrong size");

  StlsqResult res;
  res.underdetermined = q < r;
  res.Xi = Matrix(r, m);
  res.mask.assign(r * m, true);
  if (initial_mask != nullptr) res.mask = *initial_mask;

  // Column scaling (identity unless normalizing).
  Vector scale(r, 1.0);
  if (opts.normalize_columns) {
    for (std::size_t j = 0; j < r; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < q; ++i) s += Theta(i, j) * Theta(i, j);
      scale[j] = s > 0.0 ? 1.0 / std::sqrt(s) : 1.0;
    }
  }
  Matrix gram = matmul_tn(Theta, Theta);  // r x r
  Matrix rhs = matmul_tn(Theta, Zdot);    // r x m
  for (std::size_t a = 0; a < r; ++a) {
    for (std::size_t b = 0; b < r; ++b) gram(a, b) *= scale[a] * scale[b];
    for (std::size_t k = 0; k < m; ++k) rhs(a, k) *= scale[a];
  }

  auto solve_active = [&](std::size_t k, const std::vector<std::size_t>& act) {
    Vector xi(r, 0.0);
    if (act.empty()) return xi;
    Matrix g(act.size(), act.size());
    Vector b(act.size());
    for (std::size_t a = 0; a < act.size(); ++a) {
      for (std::size_t c = 0; c < act.size(); ++c) g(a, c) = gram(act[a], act[c]);
      g(a, a) += opts.ridge;
      b[a] = rhs(act[a], k);
    }
    Vector sol;
    if (auto l = linalg::cholesky(g)) {
      sol = linalg::cholesky_solve(*l, b);
    } else {
      res.rank_deficient = true;
      sol = linalg::pinv_solve_symmetric(g, b);
    }
    for (std::size_t a = 0; a < act.size(); ++a) xi[act[a]] = sol[a] * scale[act[a]];
    return xi;
  };

  auto active_list = [&](std::size_t k) {
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < r; ++i)
      if (res.mask[i * m + k]) act.push_back(i);
    return act;
  };

  std::vector<Vector> xi(m);
  for (std::size_t k = 0; k < m; ++k) xi[k] = solve_active(k, active_list(k));
  bool changed = true;
  int it = 0;
  while (changed && it < opts.max_iters) {
    ++it;
    changed = false;
    for (std::size_t k = 0; k < m; ++k) {
      bool dim_changed = false;
      for (std::size_t i = 0; i < r; ++i) {
        if (res.mask[i * m + k] && std::abs(xi[k][i]) < opts.threshold) {
          res.mask[i * m + k] = false;
          dim_changed = true;
        }
      }
      if (dim_changed) {
        xi[k] = solve_active(k, active_list(k));
        changed = true;
      }
    }
    res.active_history.push_back(static_cast<std::size_t>(std::count(res.mask.begin(), res.mask.end(), true)));
  }
  res.iterations = it;
  res.converged = !changed;
  if (!res.converged) {
    // The last solve may hold sub-threshold entries that a further pass would drop.
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t i = 0; i < r; ++i)
        if (std::abs(xi[k][i]) < opts.threshold) res.mask[i * m + k] = false;
    for (std::size_t k = 0; k < m; ++k) xi[k] = solve_active(k, active_list(k));
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < r; ++i) res.Xi(i, k) = res.mask[i * m + k] ? xi[k][i] : 0.0;
  return res;
}

Trajectory simulate_sindy(const SindyModel& model, std::span<const double> z0, double dt, std::size_t steps) {
  if (z0.size() != model.dim()) throw InvalidArgument("simulate_sindy: initial state dimension mismatch");
  const DerivativeFn f = [&model](std::span<const double> z, std::span<double> out) { model.rhs(z, out); };
  return integrate(f, z0, dt, steps, 0);
}

namespace {

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

std::string format_equations(const SindyModel& model, const std::vector<std::string>& var_names, int precision) {
  const std::size_t m = model.dim();
  if (var_names.size() != m)
    throw InvalidArgument("format_equations: expected " + std::to_string(m) + " variable names");
  if (precision < 0) throw InvalidArgument("format_equations: negative precision");
  std::ostringstream out;
  for (std::size_t k = 0; k < m; ++k) {
    out << "d" << var_names[k] << "/dt = ";
    bool first = true;
    for (std::size_t i = 0; i < model.library.size(); ++i) {
      const double c = model.Xi(i, k);
      if (!model.active(i, k) || c == 0.0) continue;
      const std::string mag = fixed(std::abs(c), precision);
      if (std::stod(mag) == 0.0) continue;
      const bool neg = c < 0.0;
      if (first) {
        out << (neg ? "-" : "") << mag;
      } else {
        out << (neg ? " - " : " + ") << mag;
      }
      const std::string name = model.library.term_name(i, var_names, " ");
      if (name != "1") out << " " << name;
      first = false;
    }
    if (first) out << "0";
    out << "\n";
  }
  return out.str();
}

SindyModel change_coordinates(const SindyModel& model, double scale, std::span<const double> offset) {
  const FeatureLibrary& lib = model.library;
  const std::size_t m = lib.dim;
  if (offset.size() != m) throw InvalidArgument("change_coordinates: offset dimension mismatch");
  if (!(scale != 0.0) || !std::isfinite(scale)) throw InvalidArgument("change_coordinates: invalid scale");
  std::map<std::vector<int>, std::size_t> index;
  for (std::size_t i = 0; i < lib.size(); ++i)
    if (lib.terms[i].kind == Term::Kind::Monomial) index[lib.terms[i].exponents] = i;

  SindyModel out = SindyModel::zeros(lib);
  for (std::size_t i = 0; i < lib.size(); ++i) {
    const Term& t = lib.terms[i];
    bool any = false;
    for (std::size_t k = 0; k < m; ++k) any = any || model.Xi(i, k) != 0.0;
    if (!any) continue;
    if (t.kind != Term::Kind::Monomial)
      throw InvalidArgument("change_coordinates: trigonometric terms cannot be re-expressed");
    // z^e = scale^{-|e|} * prod_k sum_a C(e_k, a) w_k^a (-offset_k)^{e_k - a}
    std::vector<std::pair<std::vector<int>, double>> expansion{{std::vector<int>(m, 0), 1.0}};
    for (std::size_t k = 0; k < m; ++k) {
      const int e = t.exponents[k];
      if (e == 0) continue;
      std::vector<std::pair<std::vector<int>, double>> next;
      for (const auto& [expo, coef] : expansion) {
        double binom = 1.0;
        for (int a = 0; a <= e; ++a) {
          if (a > 0) binom = binom * (e - a + 1) / a;
          const double c = coef * binom * std::pow(-offset[k], e - a);
          if (c == 0.0) continue;
          auto ex = expo;
          ex[k] += a;
          next.emplace_back(std::move(ex), c);
        }
      }
      expansion = std::move(next);
    }
    const double factor = std::pow(scale, 1 - t.degree());  // d/dt w = scale * dz/dt
    for (const auto& [expo, coef] : expansion) {
      auto it = index.find(expo);
      if (it == index.end())
        throw InvalidArgument("change_coordinates: library lacks a monomial needed by the expansion");
      for (std::size_t k = 0; k < m; ++k) out.Xi(it->second, k) += factor * coef * model.Xi(i, k);
    }
  }
  out.mask_from_coefficients();
  return out;
}

SindyModel lorenz_model(const FeatureLibrary& lib, double sigma, double rho, double beta) {
  if (lib.dim != 3 || lib.max_degree < 2) throw InvalidArgument("lorenz_model: need a degree >= 2 library in 3 variables");
  SindyModel model = SindyModel::zeros(lib);
  auto at = [&](std::vector<int> e) -> std::size_t {
    for (std::size_t i = 0; i < lib.size(); ++i)
      if (lib.terms[i].kind == Term::Kind::Monomial && lib.terms[i].exponents == e) return i;
    throw InvalidArgument("lorenz_model: library lacks a required monomial");
  };
  model.Xi(at({1, 0, 0}), 0) = -sigma;
  model.Xi(at({0, 1, 0}), 0) = sigma;
  model.Xi(at({1, 0, 0}), 1) = rho;
  model.Xi(at({0, 1, 0}), 1) = -1.0;
  model.Xi(at({1, 0, 1}), 1) = -1.0;
  model.Xi(at({1, 1, 0}), 2) = 1.0;
  model.Xi(at({0, 0, 1}), 2) = -beta;
  model.mask_from_coefficients();
  return model;
}

SindyModel express_in_library(const FeatureLibrary& lib, const DerivativeFn& f, double radius,
                              std::uint64_t seed) {
  const std::size_t m = lib.dim, r = lib.size(), samples = 4 * r + 16;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  Matrix Z(samples, m), F(samples, m);
  for (std::size_t i = 0; i < samples; ++i) {
    for (double& v : Z.row(i)) v = u(rng);
    f(Z.row(i), F.row(i));
  }
  const Matrix Theta = evaluate_library(lib, Z);
  const Matrix G = matmul_tn(Theta, Theta);
  const Matrix B = matmul_tn(Theta, F);
  SindyModel model = SindyModel::zeros(lib);
  const auto L = linalg::cholesky(G);
  if (!L) throw NumericError("express_in_library: library columns are linearly dependent on the sample");
  for (std::size_t k = 0; k < m; ++k) {
    const Vector x = linalg::cholesky_solve(*L, B.col(k));
    model.Xi.set_col(k, x);
  }
  double big = 0.0;
  for (double v : model.Xi.flat()) big = std::max(big, std::abs(v));
  for (double& v : model.Xi.flat())
    if (std::abs(v) < 1e-9 * big) v = 0.0;
  Matrix resid = matmul(Theta, model.Xi);
  if (max_abs_diff(resid, F) > 1e-6 * std::max(1.0, big * std::pow(radius, lib.max_degree)))
    throw InvalidArgument("express_in_library: the right-hand side is not in the library span");
  model.mask_from_coefficients();
  return model;
}

void save_coefficients(const std::filesystem::path& path, const SindyModel& model) {
  io::write_csv(path, model.library.term_names(), model.Xi.transpose());
}

void save_mask(const std::filesystem::path& path, const SindyModel& model) {
  Matrix m(model.dim(), model.library.size());
  for (std::size_t i = 0; i < model.library.size(); ++i)
    for (std::size_t k = 0; k < model.dim(); ++k) m(k, i) = model.active(i, k) ? 1.0 : 0.0;
  io::write_csv(path, model.library.term_names(), m);
}

SindyModel load_model(const FeatureLibrary& lib, const std::filesystem::path& coef_path,
                      const std::filesystem::path& mask_path) {
  const io::CsvTable coef = io::read_csv(coef_path);
  if (coef.header != lib.term_names() || coef.values.rows() != lib.dim)
    throw IoError("'" + coef_path.string() + "': coefficients do not match the library");
  SindyModel model = SindyModel::zeros(lib);
  model.Xi = coef.values.transpose();
  if (mask_path.empty()) {
    model.mask_from_coefficients();
  } else {
    const io::CsvTable mask = io::read_csv(mask_path);
    if (mask.values.rows() != lib.dim || mask.values.cols() != lib.size())
      throw IoError("'" + mask_path.string() + "': mask does not match the library");
    for (std::size_t i = 0; i < lib.size(); ++i)
      for (std::size_t k = 0; k < lib.dim; ++k) model.mask[i * lib.dim + k] = mask.values(k, i) != 0.0;
  }
  return model;
}

}  // namespace dsae

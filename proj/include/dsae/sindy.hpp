#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dsae/dynsys.hpp"
#include "dsae/matrix.hpp"

namespace dsae {

// One candidate function: a monomial z^e, or sin/cos of a single coordinate.
struct Term {
  enum class Kind { Monomial, Sin, Cos };
  Kind kind = Kind::Monomial;
  std::vector<int> exponents;  // monomials only, one per coordinate
  std::size_t index = 0;       // trig only

  int degree() const;
  bool operator==(const Term&) const = default;
};

// Ordered candidate set: constant, monomials in graded lexicographic order,
// then sin(z_i), cos(z_i) for every i.
struct FeatureLibrary {
  std::size_t dim = 0;
  int max_degree = 0;
  bool trig = false;
  bool include_constant = true;
  std::vector<Term> terms;

  std::size_t size() const noexcept { return terms.size(); }
  // "1", "z1", "z1^2", "z1*z2", "sin(z1)" with the given variable names.
  std::string term_name(std::size_t i, const std::vector<std::string>& vars, const char* sep = "*") const;
  std::vector<std::string> term_names(const std::vector<std::string>& vars = {}) const;
};

FeatureLibrary build_library(std::size_t dim, int max_degree, bool trig, bool include_constant = true);

// theta(z) for one point; out has lib.size() entries.
void evaluate_terms(const FeatureLibrary& lib, std::span<const double> z, std::span<double> out);
// Row-wise evaluation, q x r.
Matrix evaluate_library(const FeatureLibrary& lib, const Matrix& Z);
// d theta_i / d z_j, r x m.
Matrix library_jacobian(const FeatureLibrary& lib, std::span<const double> z);

// gz += J_theta(z)^T c, with c one weight per library term.
void library_vjp(const FeatureLibrary& lib, std::span<const double> z, std::span<const double> c,
                 std::span<double> gz);

struct SindyModel {
  FeatureLibrary library;
  Matrix Xi;                  // r x m
  std::vector<bool> mask;     // r x m, row-major; false entries of Xi are zero

  static SindyModel zeros(FeatureLibrary lib);
  std::size_t dim() const noexcept { return library.dim; }
  bool active(std::size_t term, std::size_t dimension) const { return mask[term * library.dim + dimension]; }
  std::size_t active_terms() const;
  // Zeroes coefficients outside the mask.
  void apply_mask();
  // Mask becomes (Xi != 0).
  void mask_from_coefficients();
  // out = Theta(z) Xi
  void rhs(std::span<const double> z, std::span<double> out) const;
  Vector rhs(std::span<const double> z) const;
};

struct StlsqOptions {
  double threshold = 0.1;
  double ridge = 1e-6;
  int max_iters = 20;
  // Scale library columns to unit norm for the solves; thresholds still act
  // on coefficients in the original units.
  bool normalize_columns = false;
};

struct StlsqResult {
  Matrix Xi;
  std::vector<bool> mask;
  int iterations = 0;
  bool converged = false;
  bool rank_deficient = false;  // some solve fell back to the minimum-norm solution
  bool underdetermined = false; // fewer samples than library terms
  std::vector<std::size_t> active_history;  // active count after each thresholding pass
};

// Sequentially thresholded ridge least squares, one independent regression per
// column of Zdot. `initial_mask` (r x m) restricts the starting active set.
StlsqResult stlsq(const Matrix& Theta, const Matrix& Zdot, const StlsqOptions& opts,
                  const std::vector<bool>* initial_mask = nullptr);

Trajectory simulate_sindy(const SindyModel& model, std::span<const double> z0, double dt, std::size_t steps);

// One line per dimension, e.g. "dz1/dt = -16.0 z1 + 2.5 z2 z3". `precision` is
// the number of digits after the decimal point.
std::string format_equations(const SindyModel& model, const std::vector<std::string>& var_names, int precision);
std::vector<std::string> default_var_names(std::size_t dim, const std::string& stem = "z");

// Expresses the model in coordinates w = scale * z + offset. Requires a
// polynomial library that contains every monomial up to its max degree.
SindyModel change_coordinates(const SindyModel& model, double scale, std::span<const double> offset);

// Exact Lorenz right-hand side written in a degree >= 2 polynomial library over 3 variables.
SindyModel lorenz_model(const FeatureLibrary& lib, double sigma, double rho, double beta);

// Coefficients of a right-hand side that lies in the span of `lib`, by least
// squares on random points in [-radius, radius]^m. Entries below 1e-9 of the
// largest magnitude are zeroed and masked out.
SindyModel express_in_library(const FeatureLibrary& lib, const DerivativeFn& f, double radius = 2.0,
                              std::uint64_t seed = 0);

// Coefficient CSV: header of term names, one row per dimension (Xi transposed).
void save_coefficients(const std::filesystem::path& path, const SindyModel& model);
void save_mask(const std::filesystem::path& path, const SindyModel& model);
// Reads coefficients (and the mask, when `mask_path` is non-empty) into a model over `lib`.
SindyModel load_model(const FeatureLibrary& lib, const std::filesystem::path& coef_path,
                      const std::filesystem::path& mask_path = {});

}  // namespace dsae

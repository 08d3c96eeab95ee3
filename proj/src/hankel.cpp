#include "dsae/hankel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dsae/io.hpp"
#include "dsae/kernels.hpp"
#include "dsae/linalg.hpp"

namespace dsae {

HankelEmbedding build_hankel(const MeasurementSeries& series, std::size_t n, DerivativeOptions opts) {
  if (n < 2) throw InvalidArgument("build_hankel: need at least 2 delays");
  if (series.size() < n + 2)
    throw InvalidArgument("build_hankel: series has " + std::to_string(series.size()) +
                          " samples, need at least " + std::to_string(n + 2) + " for n=" +
                          std::to_string(n));
  const double tau = series.dt();
  HankelEmbedding e;
  e.n = n;
  e.q = series.size() - n + 1;
  e.tau = tau;
  e.H = Matrix(n, e.q);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(series.values.begin() + static_cast<std::ptrdiff_t>(i), e.q, e.H.row(i).begin());
  e.Hdot = estimate_derivatives(e, opts);
  return e;
}

namespace {

Vector moving_average5(std::span<const double> x) {
  const std::size_t len = x.size();
  Vector out(len);
  for (std::size_t j = 0; j < len; ++j) {
    const std::size_t lo = j >= 2 ? j - 2 : 0;
    const std::size_t hi = std::min(len - 1, j + 2);
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) s += x[k];
    out[j] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace

Matrix estimate_derivatives(const HankelEmbedding& embedding, DerivativeOptions opts) {
  const Matrix& H = embedding.H;
  const std::size_t n = H.rows(), q = H.cols();
  if (q < 3) throw InvalidArgument("estimate_derivatives: need at least 3 columns, got " + std::to_string(q));
  if (!(embedding.tau > 0.0)) throw InvalidArgument("estimate_derivatives: tau must be positive");
  const double inv2tau = 1.0 / (2.0 * embedding.tau);
  Matrix D(n, q);
  for (std::size_t i = 0; i < n; ++i) {
    Vector smoothed;
    std::span<const double> r = H.row(i);
    if (opts.smooth) {
      smoothed = moving_average5(r);
      r = smoothed;
    }
    auto d = D.row(i);
    d[0] = (-3.0 * r[0] + 4.0 * r[1] - r[2]) * inv2tau;
    for (std::size_t j = 1; j + 1 < q; ++j) d[j] = (r[j + 1] - r[j - 1]) * inv2tau;
    d[q - 1] = (3.0 * r[q - 1] - 4.0 * r[q - 2] + r[q - 3]) * inv2tau;
  }
  return D;
}

SvdBasis truncated_svd(const Matrix& H, std::size_t p) {
  const std::size_t n = H.rows(), q = H.cols();
  if (p == 0 || p > std::min(n, q))
    throw InvalidArgument("truncated_svd: p=" + std::to_string(p) + " must be in [1, " +
                          std::to_string(std::min(n, q)) + "]");
  const double total = frobenius_sq(H);
  if (!(total > 0.0)) throw InvalidArgument("truncated_svd: matrix is zero");

  // SVD of the tall orientation; the short side's vectors come out in full.
  const bool wide = q >= n;
  const linalg::ThinSvd svd = wide ? linalg::thin_svd(H.transpose(), p) : linalg::thin_svd(H, p);

  SvdBasis b;
  b.spectrum = svd.S;
  b.S.assign(b.spectrum.begin(), b.spectrum.begin() + static_cast<std::ptrdiff_t>(p));
  if (!(b.S.back() > 1e-12 * b.S.front()))
    throw InvalidArgument("truncated_svd: p=" + std::to_string(p) + " exceeds the numerical rank");
  b.U = wide ? svd.V.col_slice(0, p) : svd.U;
  b.V = wide ? svd.U : svd.V.col_slice(0, p);
  for (std::size_t k = 0; k < p; ++k) {
    std::size_t big = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(b.U(i, k)) > std::abs(b.U(big, k))) big = i;
    if (b.U(big, k) < 0.0) {
      for (std::size_t i = 0; i < n; ++i) b.U(i, k) = -b.U(i, k);
      for (std::size_t j = 0; j < q; ++j) b.V(j, k) = -b.V(j, k);
    }
  }
  double captured = 0.0;
  for (double s : b.S) captured += s * s;
  b.variance_captured = std::min(1.0, captured / total);
  return b;
}

Vector project(std::span<const double> h, const SvdBasis& basis) {
  if (h.size() != basis.dim())
    throw InvalidArgument("project: vector has " + std::to_string(h.size()) + " entries, basis expects " +
                          std::to_string(basis.dim()));
  return matvec_t(basis.U, h);
}

Matrix project(const Matrix& h, const SvdBasis& basis) {
  if (h.rows() != basis.dim())
    throw InvalidArgument("project: matrix has " + std::to_string(h.rows()) + " rows, basis expects " +
                          std::to_string(basis.dim()));
  return matmul_tn(basis.U, h);
}

Vector lift(std::span<const double> x, const SvdBasis& basis) {
  if (x.size() != basis.rank()) throw InvalidArgument("lift: dimension mismatch");
  return matvec(basis.U, x);
}

Matrix lift(const Matrix& x, const SvdBasis& basis) {
  if (x.rows() != basis.rank()) throw InvalidArgument("lift: dimension mismatch");
  return matmul(basis.U, x);
}

DelayWindow suggest_delay_window(const MeasurementSeries& series) {
  if (series.size() < 256)
    throw InvalidArgument("suggest_delay_window: need at least 256 samples, got " +
                          std::to_string(series.size()));
  DelayWindow w;
  w.tau = series.dt();
  const double raw = std::round(0.1 / w.tau);
  w.n = static_cast<std::size_t>(std::clamp(raw, 8.0, 512.0));

  const auto& y = series.values;
  const std::size_t len = y.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(len);
  double c0 = 0.0;
  for (double v : y) c0 += (v - mean) * (v - mean);
  if (c0 > 0.0) {
    for (std::size_t lag = 1; lag < len / 2; ++lag) {
      double c = 0.0;
      for (std::size_t i = 0; i + lag < len; ++i) c += (y[i] - mean) * (y[i + lag] - mean);
      if (c <= 0.0) {
        w.autocorr_zero_lag = lag;
        break;
      }
    }
  }
  return w;
}

namespace {

std::map<std::string, std::string> read_meta(const std::filesystem::path& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(io::read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& meta_get(const std::map<std::string, std::string>& kv, const std::string& key,
                            const std::filesystem::path& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError("'" + path.string() + "': missing key '" + key + "'");
  return it->second;
}

}  // namespace

void save_embedding(const std::filesystem::path& dir, const HankelEmbedding& e) {
  io::write_csv(dir / "H.csv", {}, e.H);
  io::write_csv(dir / "Hdot.csv", {}, e.Hdot);
  std::ostringstream meta;
  meta << "n=" << e.n << "\nq=" << e.q << "\ntau=" << io::format_double(e.tau) << "\n";
  io::write_text(dir / "embedding.txt", meta.str());
}

HankelEmbedding load_embedding(const std::filesystem::path& dir) {
  const auto kv = read_meta(dir / "embedding.txt");
  HankelEmbedding e;
  e.n = std::stoul(meta_get(kv, "n", dir));
  e.q = std::stoul(meta_get(kv, "q", dir));
  e.tau = std::stod(meta_get(kv, "tau", dir));
  e.H = io::read_csv(dir / "H.csv").values;
  e.Hdot = io::read_csv(dir / "Hdot.csv").values;
  if (e.H.rows() != e.n || e.H.cols() != e.q || e.Hdot.rows() != e.n || e.Hdot.cols() != e.q)
    throw IoError("'" + dir.string() + "': embedding shape does not match metadata");
  return e;
}

void save_basis(const std::filesystem::path& dir, const SvdBasis& b) {
  io::write_csv(dir / "U.csv", {}, b.U);
  io::write_csv(dir / "V.csv", {}, b.V);
  Matrix s(b.spectrum.size(), 1);
  for (std::size_t i = 0; i < b.spectrum.size(); ++i) s(i, 0) = b.spectrum[i];
  io::write_csv(dir / "singular_values.csv", {"sigma"}, s);
  std::ostringstream meta;
  meta << "n=" << b.U.rows() << "\nq=" << b.V.rows() << "\np=" << b.rank()
       << "\nvariance_captured=" << io::format_double(b.variance_captured) << "\n";
  io::write_text(dir / "basis.txt", meta.str());
}

SvdBasis load_basis(const std::filesystem::path& dir) {
  const auto kv = read_meta(dir / "basis.txt");
  SvdBasis b;
  const std::size_t p = std::stoul(meta_get(kv, "p", dir));
  b.variance_captured = std::stod(meta_get(kv, "variance_captured", dir));
  b.U = io::read_csv(dir / "U.csv").values;
  b.V = io::read_csv(dir / "V.csv").values;
  b.spectrum = io::read_csv(dir / "singular_values.csv").values.col(0);
  if (b.U.cols() != p || b.V.cols() != p || b.spectrum.size() < p)
    throw IoError("'" + dir.string() + "': basis shape does not match metadata");
  b.S.assign(b.spectrum.begin(), b.spectrum.begin() + static_cast<std::ptrdiff_t>(p));
  return b;
}

}  // namespace dsae

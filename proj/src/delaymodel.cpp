#include "dsae/delaymodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dsae/kernels.hpp"

namespace dsae {

void LossWeights::validate() const {
  for (double l : {lambda1, lambda2, lambda3, lambda4, lambda5})
    if (!std::isfinite(l) || l < 0.0) throw InvalidArgument("loss weights must be finite and nonnegative");
}

LossWeights LossWeights::defaults_for(const HankelEmbedding& embedding) {
  LossWeights w;
  const double h2 = frobenius_sq(embedding.H);
  const double hd2 = frobenius_sq(embedding.Hdot);
  const double ratio = hd2 > 0.0 ? h2 / hd2 : 1.0;
  w.lambda1 = 1e-4 * ratio;
  w.lambda2 = 1e-4 * ratio;
  return w;
}

double LossBreakdown::combine(const LossBreakdown& b, const LossWeights& w) {
  return b.recon + w.lambda1 * b.hdot + w.lambda2 * b.zdot + w.lambda3 * b.z1 + w.lambda4 * b.cons +
         w.lambda5 * b.reg;
}

void DelayModel::validate() const {
  const std::size_t m = latent_dim();
  const std::size_t d_in = basis ? basis->rank() : delays;
  if (encoder.input_dim() != d_in || decoder.output_dim() != d_in)
    throw InvalidArgument("DelayModel: network input/output width must equal " + std::to_string(d_in));
  if (decoder.input_dim() != m) throw InvalidArgument("DelayModel: decoder input must equal latent dim");
  if (sindy.library.dim != m) throw InvalidArgument("DelayModel: library dimension must equal latent dim");
  if (basis && basis->dim() != delays) throw InvalidArgument("DelayModel: basis rows must equal n");
  weights.validate();
}

DelayModel assemble_model(const HankelEmbedding& embedding, const AssembleOptions& opts,
                          std::vector<std::string>* warnings) {
  const std::size_t n = embedding.n, m = opts.latent_dim;
  if (m < 1) throw InvalidArgument("assemble_model: latent dimension must be >= 1");
  if (opts.svd_rank && (*opts.svd_rank < 1 || *opts.svd_rank > std::min(n, embedding.q)))
    throw InvalidArgument("assemble_model: p=" + std::to_string(*opts.svd_rank) + " must be in [1, " +
                          std::to_string(std::min(n, embedding.q)) + "]");
  if (warnings != nullptr && n <= 2 * m)
    warnings->push_back("embedding dimension n=" + std::to_string(n) + " does not exceed 2m=" +
                        std::to_string(2 * m) + "; the delay map may not be an embedding");
  opts.weights.validate();

  DelayModel model;
  model.delays = n;
  model.tau = embedding.tau;
  model.weights = opts.weights;
  if (opts.svd_rank) model.basis = truncated_svd(embedding, *opts.svd_rank);
  const std::size_t d_in = opts.svd_rank ? *opts.svd_rank : n;

  std::vector<std::size_t> enc{d_in};
  enc.insert(enc.end(), opts.hidden.begin(), opts.hidden.end());
  enc.push_back(m);
  std::vector<std::size_t> dec{m};
  dec.insert(dec.end(), opts.hidden.rbegin(), opts.hidden.rend());
  dec.push_back(d_in);
  model.encoder = init_network(enc, opts.activation, opts.seed);
  model.decoder = init_network(dec, opts.activation, opts.seed + 1);
  model.sindy = SindyModel::zeros(
      build_library(m, opts.library.max_degree, opts.library.trig, opts.library.include_constant));
  return model;
}

TrainingData prepare_data(const DelayModel& model, const HankelEmbedding& embedding, const Matrix* full_state) {
  if (embedding.n != model.delays)
    throw InvalidArgument("prepare_data: embedding has n=" + std::to_string(embedding.n) + ", model expects " +
                          std::to_string(model.delays));
  TrainingData d;
  d.tau = embedding.tau;
  d.delays = embedding.H.transpose();
  const std::size_t q = embedding.q;
  if (model.basis) {
    d.inputs = project(embedding.H, *model.basis).transpose();
    d.input_rates = project(embedding.Hdot, *model.basis).transpose();
    const Matrix rec = lift(d.inputs.transpose(), *model.basis);
    const Matrix rec_rate = lift(d.input_rates.transpose(), *model.basis);
    d.recon_residual.assign(q, 0.0);
    d.rate_residual.assign(q, 0.0);
    for (std::size_t i = 0; i < embedding.n; ++i) {
      for (std::size_t j = 0; j < q; ++j) {
        const double a = embedding.H(i, j) - rec(i, j);
        const double b = embedding.Hdot(i, j) - rec_rate(i, j);
        d.recon_residual[j] += a * a;
        d.rate_residual[j] += b * b;
      }
    }
  } else {
    d.inputs = d.delays;
    d.input_rates = embedding.Hdot.transpose();
    d.recon_residual.assign(q, 0.0);
    d.rate_residual.assign(q, 0.0);
  }
  if (full_state != nullptr) {
    if (full_state->rows() != q || full_state->cols() != model.latent_dim())
      throw InvalidArgument("prepare_data: supervision targets must be q x m");
    d.full_state = *full_state;
  }
  return d;
}

ModelGradients ModelGradients::zeros_like(const DelayModel& model) {
  return {Vector(model.encoder.params.size(), 0.0), Vector(model.decoder.params.size(), 0.0),
          Vector(model.sindy.Xi.size(), 0.0)};
}

double ModelGradients::norm() const {
  double s = 0.0;
  for (const Vector* v : {&encoder, &decoder, &xi}) s += kernels::dot(v->data(), v->data(), v->size());
  return std::sqrt(s);
}

void ModelGradients::scale(double f) {
  for (Vector* v : {&encoder, &decoder, &xi})
    for (double& x : *v) x *= f;
}

namespace {

// Library terms flattened to factor lists so the rollout evaluates theta and
// its vector-Jacobian product without walking exponent vectors.
class CompiledLibrary {
 public:
  explicit CompiledLibrary(const FeatureLibrary& lib) : m_(lib.dim) {
    for (const Term& t : lib.terms) {
      Entry e;
      e.kind = t.kind;
      e.begin = factors_.size();
      if (t.kind == Term::Kind::Monomial) {
        for (std::size_t k = 0; k < lib.dim; ++k)
          for (int p = 0; p < t.exponents[k]; ++p) factors_.push_back(k);
      } else {
        factors_.push_back(t.index);
      }
      e.end = factors_.size();
      entries_.push_back(e);
    }
  }

  std::size_t size() const { return entries_.size(); }

  void eval(const double* z, double* theta) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Entry& e = entries_[i];
      switch (e.kind) {
        case Term::Kind::Monomial: {
          double v = 1.0;
          for (std::size_t f = e.begin; f < e.end; ++f) v *= z[factors_[f]];
          theta[i] = v;
          break;
        }
        case Term::Kind::Sin:
          theta[i] = std::sin(z[factors_[e.begin]]);
          break;
        case Term::Kind::Cos:
          theta[i] = std::cos(z[factors_[e.begin]]);
          break;
      }
    }
  }

  // gz = J_theta(z)^T c (overwrites gz).
  void vjp(const double* z, const double* c, double* gz) const {
    std::fill(gz, gz + m_, 0.0);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Entry& e = entries_[i];
      const double ci = c[i];
      if (ci == 0.0) continue;
      switch (e.kind) {
        case Term::Kind::Monomial:
          for (std::size_t f = e.begin; f < e.end; ++f) {
            double v = ci;
            for (std::size_t o = e.begin; o < e.end; ++o)
              if (o != f) v *= z[factors_[o]];
            gz[factors_[f]] += v;
          }
          break;
        case Term::Kind::Sin:
          gz[factors_[e.begin]] += ci * std::cos(z[factors_[e.begin]]);
          break;
        case Term::Kind::Cos:
          gz[factors_[e.begin]] -= ci * std::sin(z[factors_[e.begin]]);
          break;
      }
    }
  }

 private:
  struct Entry {
    Term::Kind kind;
    std::size_t begin, end;
  };
  std::size_t m_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> factors_;
};

// Per-sample RK4 rollout of the SINDy layer with its reverse pass. The four
// stage inputs and their library values are kept for the reverse pass.
class Rollout {
 public:
  Rollout(const SindyModel& sindy, double dt, std::size_t steps)
      : lib_(sindy.library), m_(sindy.dim()), r_(lib_.size()), dt_(dt), steps_(steps),
        xi_(sindy.Xi.data(), sindy.Xi.data() + sindy.Xi.size()), stages_(steps * 4 * m_),
        thetas_(steps * 4 * r_), states_((steps + 1) * m_), c_(r_), k_(4 * m_) {}

  // Returns the number of valid states after z0 (steps_ unless diverged).
  std::size_t forward(std::span<const double> z0) {
    std::copy(z0.begin(), z0.end(), states_.begin());
    for (std::size_t j = 0; j < steps_; ++j) {
      const double* s = &states_[j * m_];
      double* st = &stages_[j * 4 * m_];
      double* th = &thetas_[j * 4 * r_];
      double* next = &states_[(j + 1) * m_];
      static constexpr double kStageScale[3] = {0.5, 0.5, 1.0};
      std::copy_n(s, m_, st);
      for (std::size_t q = 0; q < 4; ++q) {
        if (q > 0)
          for (std::size_t k = 0; k < m_; ++k) st[q * m_ + k] = s[k] + kStageScale[q - 1] * dt_ * k_[(q - 1) * m_ + k];
        lib_.eval(&st[q * m_], &th[q * r_]);
        rhs(&th[q * r_], &k_[q * m_]);
      }
      bool ok = true;
      for (std::size_t k = 0; k < m_; ++k) {
        next[k] = s[k] + dt_ / 6.0 * (k_[k] + 2.0 * k_[m_ + k] + 2.0 * k_[2 * m_ + k] + k_[3 * m_ + k]);
        ok = ok && std::isfinite(next[k]) && std::abs(next[k]) <= kDivergenceLimit;
      }
      for (std::size_t k = 0; k < 4 * m_; ++k) ok = ok && std::isfinite(k_[k]);
      if (!ok) return j;
    }
    return steps_;
  }

  const double* state(std::size_t j) const { return &states_[j * m_]; }

  // `g[j * m + k]` holds dL/d state_j[k] from the loss for j = 1..valid; it is
  // consumed in place. Accumulates into g_z0 and g_xi (r x m row-major, may be null).
  void backward(std::size_t valid, std::vector<double>& g, double* g_z0, double* g_xi) {
    static constexpr double kWeight[4] = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
    static constexpr double kStageScale[3] = {0.5, 0.5, 1.0};
    double gk[4 * 8];
    std::vector<double> gk_heap;
    double* gkp = gk;
    if (4 * m_ > 32) {
      gk_heap.resize(4 * m_);
      gkp = gk_heap.data();
    }
    std::vector<double> gs(m_);
    for (std::size_t j = valid; j-- > 0;) {
      const double* gnext = &g[(j + 1) * m_];
      double* gcur = &g[j * m_];
      const double* st = &stages_[j * 4 * m_];
      const double* th = &thetas_[j * 4 * r_];
      for (std::size_t q = 0; q < 4; ++q)
        for (std::size_t k = 0; k < m_; ++k) gkp[q * m_ + k] = dt_ * kWeight[q] * gnext[k];
      for (std::size_t k = 0; k < m_; ++k) gcur[k] += gnext[k];
      for (std::size_t q = 4; q-- > 0;) {
        back(&st[q * m_], &th[q * r_], &gkp[q * m_], gs.data(), g_xi);
        for (std::size_t k = 0; k < m_; ++k) gcur[k] += gs[k];
        if (q > 0)
          for (std::size_t k = 0; k < m_; ++k) gkp[(q - 1) * m_ + k] += kStageScale[q - 1] * dt_ * gs[k];
      }
    }
    for (std::size_t k = 0; k < m_; ++k) g_z0[k] += g[k];
  }

 private:
  void rhs(const double* theta, double* out) const {
    std::fill(out, out + m_, 0.0);
    for (std::size_t i = 0; i < r_; ++i) {
      const double t = theta[i];
      const double* row = &xi_[i * m_];
      for (std::size_t k = 0; k < m_; ++k) out[k] += t * row[k];
    }
  }

  // For k = Xi^T theta(s): g_xi += theta(s) gk^T, gs = J_theta(s)^T Xi gk.
  void back(const double* s, const double* theta, const double* gk, double* gs, double* g_xi) {
    for (std::size_t i = 0; i < r_; ++i) {
      const double* row = &xi_[i * m_];
      double ci = 0.0;
      for (std::size_t k = 0; k < m_; ++k) ci += row[k] * gk[k];
      c_[i] = ci;
      if (g_xi != nullptr)
        for (std::size_t k = 0; k < m_; ++k) g_xi[i * m_ + k] += theta[i] * gk[k];
    }
    lib_.vjp(s, c_.data(), gs);
  }

  CompiledLibrary lib_;
  std::size_t m_, r_;
  double dt_;
  std::size_t steps_;
  std::vector<double> xi_, stages_, thetas_, states_, c_, k_;
};

}  // namespace

LossBreakdown compute_losses(const DelayModel& model, const TrainingData& data,
                             std::span<const std::size_t> columns, const LossOptions& opts,
                             ModelGradients* grad) {
  const std::size_t B = columns.size();
  if (B == 0) throw InvalidArgument("compute_losses: empty batch");
  const std::size_t m = model.latent_dim(), d_in = model.input_dim(), n = data.delay_count();
  const std::size_t N = opts.rollout_steps;
  if (data.inputs.cols() != d_in) throw InvalidArgument("compute_losses: data does not match model input");
  if (opts.compute_cons && (N < 1 || N >= n))
    throw InvalidArgument("compute_losses: rollout steps must be in [1, n-1]");
  const bool supervised = opts.lambda_sup > 0.0 && data.full_state.has_value();
  const LossWeights& w = model.weights;
  const FeatureLibrary& lib = model.sindy.library;
  const std::size_t r = lib.size();

  Matrix X(B, d_in), Xd(B, d_in);
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t c = columns[b];
    if (c >= data.columns()) throw InvalidArgument("compute_losses: column index out of range");
    std::copy_n(data.inputs.row(c).begin(), d_in, X.row(b).begin());
    std::copy_n(data.input_rates.row(c).begin(), d_in, Xd.row(b).begin());
  }

  ForwardCache enc_cache, dec_cache;
  auto [Z, Zd] = forward_with_tangent(model.encoder, X, Xd, grad ? &enc_cache : nullptr);
  Matrix Theta(B, r), F(B, m);
  for (std::size_t b = 0; b < B; ++b) {
    evaluate_terms(lib, Z.row(b), Theta.row(b));
    auto f = F.row(b);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t k = 0; k < m; ++k) f[k] += Theta(b, i) * model.sindy.Xi(i, k);
  }
  auto [O, Od] = forward_with_tangent(model.decoder, Z, F, grad ? &dec_cache : nullptr);

  const double Bd = static_cast<double>(B), nd = static_cast<double>(n), md = static_cast<double>(m);
  LossBreakdown L;
  Matrix gO, gOd, gZ, gZd, gF;
  if (grad) {
    gO = Matrix(B, d_in);
    gOd = Matrix(B, d_in);
    gZd = Matrix(B, m);
  }
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t c = columns[b];
    double rec = data.recon_residual[c], rate = data.rate_residual[c];
    for (std::size_t k = 0; k < d_in; ++k) {
      const double e = X(b, k) - O(b, k);
      const double ed = Xd(b, k) - Od(b, k);
      rec += e * e;
      rate += ed * ed;
      if (grad) {
        gO(b, k) = -2.0 * e / (Bd * nd);
        gOd(b, k) = -2.0 * w.lambda1 * ed / (Bd * nd);
      }
    }
    L.recon += rec;
    L.hdot += rate;
    for (std::size_t k = 0; k < m; ++k) {
      const double e = Zd(b, k) - F(b, k);
      L.zdot += e * e;
      if (grad) gZd(b, k) = 2.0 * w.lambda2 * e / (Bd * md);
    }
    const double e1 = data.delays(c, 0) - Z(b, 0);
    L.z1 += e1 * e1;
    if (supervised) {
      for (std::size_t k = 0; k < m; ++k) {
        const double e = Z(b, k) - (*data.full_state)(c, k);
        L.supervised += e * e;
      }
    }
  }
  L.recon /= Bd * nd;
  L.hdot /= Bd * nd;
  L.zdot /= Bd * md;
  L.z1 /= Bd;
  L.supervised /= Bd * md;

  for (std::size_t i = 0; i < model.sindy.mask.size(); ++i)
    if (model.sindy.mask[i]) L.reg += std::abs(model.sindy.Xi.data()[i]);

  if (grad) {
    InputAdjoints dec_in;
    backward(model.decoder, dec_cache, gO, &gOd, grad->decoder, &dec_in);
    gZ = std::move(dec_in.value);
    gF = std::move(dec_in.tangent);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t c = columns[b];
      for (std::size_t k = 0; k < m; ++k) gF(b, k) -= gZd(b, k);
      gZ(b, 0) -= 2.0 * w.lambda3 * (data.delays(c, 0) - Z(b, 0)) / Bd;
      if (supervised)
        for (std::size_t k = 0; k < m; ++k)
          gZ(b, k) += 2.0 * opts.lambda_sup * (Z(b, k) - (*data.full_state)(c, k)) / (Bd * md);
    }
    // F = Theta(Z) Xi
    Vector cvec(r);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < r; ++i) {
        double ci = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          grad->xi[i * m + k] += Theta(b, i) * gF(b, k);
          ci += model.sindy.Xi(i, k) * gF(b, k);
        }
        cvec[i] = ci;
      }
      library_vjp(lib, Z.row(b), cvec, gZ.row(b));
    }
  }

  if (opts.compute_cons) {
    Rollout roll(model.sindy, data.tau, N);
    std::vector<double> g_states((N + 1) * m);
    const double coef = w.lambda4 / (Bd * static_cast<double>(N));
    double cons = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t c = columns[b];
      const std::size_t valid = roll.forward(Z.row(b));
      if (valid < N) {
        ++L.diverged_rollouts;
        cons += kDivergedStepPenalty * static_cast<double>(N - valid);
      }
      if (grad) std::fill(g_states.begin(), g_states.end(), 0.0);
      for (std::size_t j = 1; j <= valid; ++j) {
        const double e = data.delays(c, j) - roll.state(j)[0];
        cons += e * e;
        if (grad) g_states[j * m] = -2.0 * coef * e;
      }
      if (grad) roll.backward(valid, g_states, gZ.row(b).data(), grad->xi.data());
    }
    L.cons = cons / (Bd * static_cast<double>(N));
  }

  if (grad) {
    backward(model.encoder, enc_cache, gZ, &gZd, grad->encoder);
    for (std::size_t i = 0; i < grad->xi.size(); ++i) {
      if (!model.sindy.mask[i] || model.xi_frozen) {
        grad->xi[i] = 0.0;
        continue;
      }
      const double x = model.sindy.Xi.data()[i];
      if (x != 0.0) grad->xi[i] += w.lambda5 * (x > 0.0 ? 1.0 : -1.0);
    }
  }
  L.total = LossBreakdown::combine(L, w);
  return L;
}

Matrix rollout_latent(const SindyModel& sindy, std::span<const double> z0, std::size_t steps, double dt) {
  if (z0.size() != sindy.dim()) throw InvalidArgument("rollout_latent: initial state dimension mismatch");
  if (!(dt > 0.0)) throw InvalidArgument("rollout_latent: dt must be positive");
  Rollout roll(sindy, dt, steps);
  const std::size_t valid = roll.forward(z0);
  if (valid < steps) throw IntegrationDiverged(valid + 1, "rollout_latent: latent state diverged");
  Matrix out(steps, sindy.dim());
  for (std::size_t j = 0; j < steps; ++j) std::copy_n(roll.state(j + 1), sindy.dim(), out.row(j).begin());
  return out;
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "supervised") return InitMode::Supervised;
  if (name == "known_equation") return InitMode::KnownEquation;
  if (name == "perturbed") return InitMode::Perturbed;
  if (name == "random") return InitMode::Random;
  throw InvalidArgument("unknown init mode '" + name + "' (expected supervised, known_equation, perturbed, random)");
}

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::Supervised:
      return "supervised";
    case InitMode::KnownEquation:
      return "known_equation";
    case InitMode::Perturbed:
      return "perturbed";
    case InitMode::Random:
      return "random";
  }
  return "unknown";
}

void initialize_xi(DelayModel& model, InitMode mode, const Matrix* true_xi, double sigma, std::uint64_t seed) {
  SindyModel& s = model.sindy;
  const bool needs_truth = mode == InitMode::KnownEquation || mode == InitMode::Perturbed;
  if (needs_truth && true_xi == nullptr)
    throw InvalidArgument("initialize_xi: mode '" + to_string(mode) + "' requires the true coefficients");
  if (true_xi != nullptr && (true_xi->rows() != s.Xi.rows() || true_xi->cols() != s.Xi.cols()))
    throw InvalidArgument("initialize_xi: true coefficients must be r x m");
  if (sigma < 0.0) throw InvalidArgument("initialize_xi: sigma must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  model.xi_frozen = false;
  std::fill(s.mask.begin(), s.mask.end(), true);
  switch (mode) {
    case InitMode::KnownEquation:
      s.Xi = *true_xi;
      s.mask_from_coefficients();
      model.xi_frozen = true;
      break;
    case InitMode::Perturbed:
      s.Xi = *true_xi;
      for (double& x : s.Xi.flat()) x += sigma * unit(rng);
      break;
    case InitMode::Random:
    case InitMode::Supervised:
      for (double& x : s.Xi.flat()) x = 0.1 * unit(rng);
      break;
  }
}

}  // namespace dsae

#include "dsae/neural.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "dsae/error.hpp"
#include "dsae/io.hpp"
#include "dsae/kernels.hpp"

namespace dsae {

Activation parse_activation(const std::string& name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "elu") return Activation::Elu;
  throw InvalidArgument("unknown activation '" + name + "' (expected sigmoid, tanh, elu)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Tanh:
      return "tanh";
    case Activation::Elu:
      return "elu";
  }
  return "unknown";
}

namespace {

inline double activate(Activation act, double a) {
  switch (act) {
    case Activation::Sigmoid:
      return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
    case Activation::Tanh:
      return std::tanh(a);
    case Activation::Elu:
      return a > 0.0 ? a : std::expm1(a);
  }
  return a;
}

// First and second derivative given the pre-activation a and value v = act(a).
inline void derivatives(Activation act, double a, double v, double& d1, double& d2) {
  switch (act) {
    case Activation::Sigmoid:
      d1 = v * (1.0 - v);
      d2 = d1 * (1.0 - 2.0 * v);
      return;
    case Activation::Tanh:
      d1 = 1.0 - v * v;
      d2 = -2.0 * v * d1;
      return;
    case Activation::Elu:
      if (a > 0.0) {
        d1 = 1.0;
        d2 = 0.0;
      } else {
        d1 = v + 1.0;
        d2 = v + 1.0;
      }
      return;
  }
}

bool all_finite(const Matrix& m) {
  for (double v : m.flat())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

std::size_t parameter_count(std::span<const std::size_t> dims) {
  std::size_t n = 0;
  for (std::size_t l = 1; l < dims.size(); ++l) n += dims[l] * dims[l - 1] + dims[l];
  return n;
}

std::size_t Network::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += dims[l + 1] * dims[l] + dims[l + 1];
  return off;
}

std::size_t Network::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + dims[layer + 1] * dims[layer];
}

std::span<double> Network::weights(std::size_t layer) {
  return {params.data() + weight_offset(layer), dims[layer + 1] * dims[layer]};
}
std::span<const double> Network::weights(std::size_t layer) const {
  return {params.data() + weight_offset(layer), dims[layer + 1] * dims[layer]};
}
std::span<double> Network::bias(std::size_t layer) {
  return {params.data() + bias_offset(layer), dims[layer + 1]};
}
std::span<const double> Network::bias(std::size_t layer) const {
  return {params.data() + bias_offset(layer), dims[layer + 1]};
}

Network init_network(std::vector<std::size_t> dims, Activation activation, std::uint64_t seed) {
  if (dims.size() < 2) throw InvalidArgument("init_network: need at least one layer");
  for (std::size_t d : dims)
    if (d == 0) throw InvalidArgument("init_network: layer widths must be positive");
  Network net;
  net.dims = std::move(dims);
  net.activation = activation;
  net.seed = seed;
  net.params.assign(parameter_count(net.dims), 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double fan_in = static_cast<double>(net.dims[l]);
    const double fan_out = static_cast<double>(net.dims[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : net.weights(l)) w = dist(rng);
  }
  return net;
}

namespace {

void affine(const Network& net, std::size_t l, const Matrix& in, Matrix& out, bool add_bias) {
  const std::size_t batch = in.rows(), din = net.dims[l], dout = net.dims[l + 1];
  out = Matrix(batch, dout);
  kernels::gemm_nt(batch, dout, din, in.data(), net.weights(l).data(), out.data());
  if (add_bias) {
    const auto b = net.bias(l);
    for (std::size_t i = 0; i < batch; ++i) kernels::axpy(1.0, b.data(), out.row(i).data(), dout);
  }
}

Matrix run(const Network& net, const Matrix& x, const Matrix* xdot, ForwardCache* cache, Matrix* tangent_out) {
  if (x.cols() != net.input_dim())
    throw InvalidArgument("forward: input has " + std::to_string(x.cols()) + " features, network expects " +
                          std::to_string(net.input_dim()));
  if (xdot != nullptr && (xdot->rows() != x.rows() || xdot->cols() != x.cols()))
    throw InvalidArgument("forward_with_tangent: tangent shape differs from value shape");
  const std::size_t L = net.num_layers();
  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  c.has_tangent = xdot != nullptr;
  c.values.assign(L + 1, Matrix());
  c.pre.assign(L, Matrix());
  c.tvalues.assign(c.has_tangent ? L + 1 : 0, Matrix());
  c.tpre.assign(c.has_tangent ? L : 0, Matrix());
  c.values[0] = x;
  if (c.has_tangent) c.tvalues[0] = *xdot;

  for (std::size_t l = 0; l < L; ++l) {
    affine(net, l, c.values[l], c.pre[l], true);
    if (c.has_tangent) affine(net, l, c.tvalues[l], c.tpre[l], false);
    const bool hidden = l + 1 < L;
    if (!hidden) {
      c.values[l + 1] = c.pre[l];
      if (c.has_tangent) c.tvalues[l + 1] = c.tpre[l];
      break;
    }
    Matrix v(c.pre[l].rows(), c.pre[l].cols());
    for (std::size_t k = 0; k < v.size(); ++k) v.data()[k] = activate(net.activation, c.pre[l].data()[k]);
    if (c.has_tangent) {
      Matrix t(v.rows(), v.cols());
      for (std::size_t k = 0; k < v.size(); ++k) {
        double d1 = 0.0, d2 = 0.0;
        derivatives(net.activation, c.pre[l].data()[k], v.data()[k], d1, d2);
        t.data()[k] = d1 * c.tpre[l].data()[k];
      }
      c.tvalues[l + 1] = std::move(t);
    }
    c.values[l + 1] = std::move(v);
  }
  if (!all_finite(c.values[L]) || (c.has_tangent && !all_finite(c.tvalues[L]))) {
    for (std::size_t l = 1; l <= L; ++l)
      if (!all_finite(c.values[l]) || (c.has_tangent && !all_finite(c.tvalues[l])))
        throw NumericError("forward: non-finite value at layer " + std::to_string(l));
  }
  if (tangent_out != nullptr) *tangent_out = c.tvalues[L];
  return c.values[L];
}

}  // namespace

Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache) {
  return run(net, x, nullptr, cache, nullptr);
}

std::pair<Matrix, Matrix> forward_with_tangent(const Network& net, const Matrix& x, const Matrix& xdot,
                                               ForwardCache* cache) {
  Matrix t;
  Matrix v = run(net, x, &xdot, cache, &t);
  return {std::move(v), std::move(t)};
}

Vector forward(const Network& net, std::span<const double> x) {
  Matrix in(1, x.size());
  std::copy(x.begin(), x.end(), in.data());
  Matrix out = forward(net, in);
  return Vector(out.flat().begin(), out.flat().end());
}

TangentPair forward_with_tangent(const Network& net, const TangentPair& in) {
  if (in.value.size() != in.tangent.size()) throw InvalidArgument("TangentPair: dimension mismatch");
  Matrix x(1, in.value.size()), xd(1, in.tangent.size());
  std::copy(in.value.begin(), in.value.end(), x.data());
  std::copy(in.tangent.begin(), in.tangent.end(), xd.data());
  auto [v, t] = forward_with_tangent(net, x, xd);
  return {Vector(v.flat().begin(), v.flat().end()), Vector(t.flat().begin(), t.flat().end())};
}

void backward(const Network& net, const ForwardCache& cache, const Matrix& output_adjoint,
              const Matrix* tangent_adjoint, std::span<double> grad, InputAdjoints* inputs) {
  const std::size_t L = net.num_layers();
  if (cache.values.size() != L + 1) throw InvalidArgument("backward: cache does not match network");
  const std::size_t batch = cache.values[0].rows();
  if (output_adjoint.rows() != batch || output_adjoint.cols() != net.output_dim())
    throw InvalidArgument("backward: output adjoint shape mismatch");
  if (tangent_adjoint != nullptr) {
    if (!cache.has_tangent) throw InvalidArgument("backward: tangent adjoint needs a tangent cache");
    if (tangent_adjoint->rows() != batch || tangent_adjoint->cols() != net.output_dim())
      throw InvalidArgument("backward: tangent adjoint shape mismatch");
  }
  if (grad.size() != net.params.size()) throw InvalidArgument("backward: gradient buffer size mismatch");

  const bool tangent = tangent_adjoint != nullptr;
  Matrix g_v = output_adjoint;
  Matrix g_t = tangent ? *tangent_adjoint : Matrix();

  for (std::size_t l = L; l-- > 0;) {
    const bool hidden = l + 1 < L;
    Matrix g_a, g_ta;
    if (!hidden) {
      g_a = std::move(g_v);
      if (tangent) g_ta = std::move(g_t);
    } else {
      g_a = Matrix(g_v.rows(), g_v.cols());
      if (tangent) g_ta = Matrix(g_v.rows(), g_v.cols());
      const Matrix& a = cache.pre[l];
      const Matrix& v = cache.values[l + 1];
      for (std::size_t k = 0; k < g_a.size(); ++k) {
        double d1 = 0.0, d2 = 0.0;
        derivatives(net.activation, a.data()[k], v.data()[k], d1, d2);
        double ga = d1 * g_v.data()[k];
        if (tangent) {
          ga += d2 * cache.tpre[l].data()[k] * g_t.data()[k];
          g_ta.data()[k] = d1 * g_t.data()[k];
        }
        g_a.data()[k] = ga;
      }
    }

    const std::size_t din = net.dims[l], dout = net.dims[l + 1];
    double* gw = grad.data() + net.weight_offset(l);
    double* gb = grad.data() + net.bias_offset(l);
    kernels::gemm_tn_acc(dout, din, batch, g_a.data(), cache.values[l].data(), gw);
    for (std::size_t i = 0; i < batch; ++i) kernels::axpy(1.0, g_a.row(i).data(), gb, dout);
    if (tangent) kernels::gemm_tn_acc(dout, din, batch, g_ta.data(), cache.tvalues[l].data(), gw);

    const bool need_input = l > 0 || inputs != nullptr;
    if (need_input) {
      g_v = Matrix(batch, din);
      kernels::gemm_nn_acc(batch, din, dout, g_a.data(), net.weights(l).data(), g_v.data());
      if (tangent) {
        g_t = Matrix(batch, din);
        kernels::gemm_nn_acc(batch, din, dout, g_ta.data(), net.weights(l).data(), g_t.data());
      }
    }
  }
  if (inputs != nullptr) {
    inputs->value = std::move(g_v);
    inputs->tangent = tangent ? std::move(g_t) : Matrix(batch, net.input_dim());
  }
}

AdamState AdamState::for_size(std::size_t n, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void AdamState::reset() {
  step = 0;
  std::fill(m.begin(), m.end(), 0.0);
  std::fill(v.begin(), v.end(), 0.0);
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (grads.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw InvalidArgument("adam_update: parameter, gradient and moment sizes differ");
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

void save_network(const std::filesystem::path& dir, const std::string& stem, const Network& net) {
  Matrix p(net.params.size(), 1);
  std::copy(net.params.begin(), net.params.end(), p.data());
  io::write_csv(dir / (stem + ".csv"), {"param"}, p);
  std::ostringstream meta;
  meta << "layer_dims=";
  for (std::size_t i = 0; i < net.dims.size(); ++i) meta << (i ? "," : "") << net.dims[i];
  meta << "\nactivation=" << to_string(net.activation) << "\nseed=" << net.seed << "\n";
  io::write_text(dir / (stem + ".txt"), meta.str());
}

Network load_network(const std::filesystem::path& dir, const std::string& stem) {
  std::istringstream in(io::read_text(dir / (stem + ".txt")));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!kv.count("layer_dims") || !kv.count("activation") || !kv.count("seed"))
    throw IoError("'" + (dir / (stem + ".txt")).string() + "': incomplete network manifest");
  Network net;
  std::istringstream dims(kv["layer_dims"]);
  std::string tok;
  while (std::getline(dims, tok, ',')) net.dims.push_back(std::stoul(tok));
  net.activation = parse_activation(kv["activation"]);
  net.seed = std::stoull(kv["seed"]);
  const Matrix p = io::read_csv(dir / (stem + ".csv")).values;
  if (net.dims.size() < 2 || p.size() != parameter_count(net.dims))
    throw IoError("'" + (dir / (stem + ".csv")).string() + "': parameter count does not match layer_dims");
  net.params.assign(p.flat().begin(), p.flat().end());
  return net;
}

}  // namespace dsae

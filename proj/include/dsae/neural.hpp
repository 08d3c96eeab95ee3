#pragma once

// Small dense feed-forward networks with forward-mode tangent propagation and
// a reverse pass that differentiates through both the value and the tangent
// paths. Samples are processed as row-major batches (one row per sample).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsae/matrix.hpp"

namespace dsae {

enum class Activation { Sigmoid, Tanh, Elu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

// Hidden layers apply the activation; the output layer is affine.
struct Network {
  std::vector<std::size_t> dims;  // d0, d1, ..., dL
  Activation activation = Activation::Sigmoid;
  std::uint64_t seed = 0;
  // Flat parameters: for every layer, W (d_l x d_{l-1}, row-major) then b (d_l).
  Vector params;

  std::size_t num_layers() const noexcept { return dims.size() - 1; }
  std::size_t input_dim() const noexcept { return dims.front(); }
  std::size_t output_dim() const noexcept { return dims.back(); }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
};

std::size_t parameter_count(std::span<const std::size_t> dims);

// Xavier-uniform weights, zero biases, deterministic in `seed`.
Network init_network(std::vector<std::size_t> dims, Activation activation, std::uint64_t seed);

struct TangentPair {
  Vector value;
  Vector tangent;
};

// Intermediate values kept for the reverse pass.
struct ForwardCache {
  bool has_tangent = false;
  std::vector<Matrix> values;    // L + 1 entries, values[0] is the input
  std::vector<Matrix> pre;       // L entries, affine outputs
  std::vector<Matrix> tvalues;   // tangents of `values`
  std::vector<Matrix> tpre;      // tangents of `pre`
};

// Batched forward pass. Throws NumericError naming the first layer that
// produced a non-finite value.
Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache = nullptr);
// Returns (f(x), J_f(x) xdot) row by row.
std::pair<Matrix, Matrix> forward_with_tangent(const Network& net, const Matrix& x, const Matrix& xdot,
                                               ForwardCache* cache = nullptr);

Vector forward(const Network& net, std::span<const double> x);
TangentPair forward_with_tangent(const Network& net, const TangentPair& in);

struct InputAdjoints {
  Matrix value;
  Matrix tangent;
};

// Reverse pass over a cached forward (or forward_with_tangent) call.
// Accumulates parameter gradients into `grad` (same layout as net.params).
// `tangent_adjoint` may be null; it requires a tangent cache otherwise.
void backward(const Network& net, const ForwardCache& cache, const Matrix& output_adjoint,
              const Matrix* tangent_adjoint, std::span<double> grad, InputAdjoints* inputs = nullptr);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  Vector m;
  Vector v;

  static AdamState for_size(std::size_t n, double lr);
  void reset();
};

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state);

// `<stem>.csv` holds one parameter per line, `<stem>.txt` the manifest.
void save_network(const std::filesystem::path& dir, const std::string& stem, const Network& net);
Network load_network(const std::filesystem::path& dir, const std::string& stem);

}  // namespace dsae

#include "dsae/checkpoint.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "dsae/io.hpp"

namespace dsae {

Standardization Standardization::fit(std::span<const double> y) {
  if (y.empty()) throw InvalidArgument("standardization needs at least one sample");
  Standardization st;
  st.mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double v = 0.0;
  for (double x : y) v += (x - st.mean) * (x - st.mean);
  v /= static_cast<double>(y.size());
  st.scale = v > 0.0 ? std::sqrt(v) : 1.0;
  return st;
}

MeasurementSeries standardize(const MeasurementSeries& s, const Standardization& st) {
  MeasurementSeries out = s;
  for (double& v : out.values) v = st.forward(v);
  return out;
}

SindyModel descale_model(const SindyModel& model, const Standardization& st) {
  Vector offset(model.dim(), 0.0);
  offset[0] = st.mean;
  return change_coordinates(model, st.scale, offset);
}

namespace {

std::map<std::string, std::string> parse_manifest(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.empty() || line[0] == '#') continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

const std::string& get(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::filesystem::path& file) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError(file.string() + ": missing key '" + key + "'");
  return it->second;
}

double to_double(const std::string& s) { return std::stod(s); }

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const DelayModel& model, const Standardization& st) {
  model.validate();
  std::filesystem::create_directories(dir);
  save_network(dir, "encoder", model.encoder);
  save_network(dir, "decoder", model.decoder);
  save_coefficients(dir / "xi.csv", model.sindy);
  save_mask(dir / "mask.csv", model.sindy);
  if (model.basis) save_basis(dir / "basis", *model.basis);
  const FeatureLibrary& lib = model.sindy.library;
  const LossWeights& w = model.weights;
  std::ostringstream s;
  s << "latent_dim = " << model.latent_dim() << '\n'
    << "delays = " << model.delays << '\n'
    << "tau = " << io::format_double(model.tau) << '\n'
    << "svd_rank = " << (model.basis ? std::to_string(model.basis->rank()) : std::string("none")) << '\n'
    << "library_degree = " << lib.max_degree << '\n'
    << "library_trig = " << (lib.trig ? 1 : 0) << '\n'
    << "library_constant = " << (lib.include_constant ? 1 : 0) << '\n'
    << "xi_frozen = " << (model.xi_frozen ? 1 : 0) << '\n'
    << "lambda1 = " << io::format_double(w.lambda1) << '\n'
    << "lambda2 = " << io::format_double(w.lambda2) << '\n'
    << "lambda3 = " << io::format_double(w.lambda3) << '\n'
    << "lambda4 = " << io::format_double(w.lambda4) << '\n'
    << "lambda5 = " << io::format_double(w.lambda5) << '\n'
    << "standardize_mean = " << io::format_double(st.mean) << '\n'
    << "standardize_scale = " << io::format_double(st.scale) << '\n';
  io::write_text(dir / "model.txt", s.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("checkpoint not found: " + dir.string());
  const auto manifest = dir / "model.txt";
  if (!std::filesystem::exists(manifest)) throw IoError("checkpoint not found: " + manifest.string());
  const auto kv = parse_manifest(io::read_text(manifest));
  Checkpoint cp;
  DelayModel& m = cp.model;
  try {
    const std::size_t dim = std::stoul(get(kv, "latent_dim", manifest));
    m.delays = std::stoul(get(kv, "delays", manifest));
    m.tau = to_double(get(kv, "tau", manifest));
    const FeatureLibrary lib = build_library(dim, std::stoi(get(kv, "library_degree", manifest)),
                                             get(kv, "library_trig", manifest) == "1",
                                             get(kv, "library_constant", manifest) == "1");
    m.xi_frozen = get(kv, "xi_frozen", manifest) == "1";
    m.weights.lambda1 = to_double(get(kv, "lambda1", manifest));
    m.weights.lambda2 = to_double(get(kv, "lambda2", manifest));
    m.weights.lambda3 = to_double(get(kv, "lambda3", manifest));
    m.weights.lambda4 = to_double(get(kv, "lambda4", manifest));
    m.weights.lambda5 = to_double(get(kv, "lambda5", manifest));
    cp.standardization.mean = to_double(get(kv, "standardize_mean", manifest));
    cp.standardization.scale = to_double(get(kv, "standardize_scale", manifest));
    for (const char* f : {"encoder.csv", "encoder.txt", "decoder.csv", "decoder.txt", "xi.csv", "mask.csv"})
      if (!std::filesystem::exists(dir / f)) throw IoError("checkpoint not found: " + (dir / f).string());
    m.encoder = load_network(dir, "encoder");
    m.decoder = load_network(dir, "decoder");
    m.sindy = load_model(lib, dir / "xi.csv", dir / "mask.csv");
    if (get(kv, "svd_rank", manifest) != "none") m.basis = load_basis(dir / "basis");
  } catch (const std::invalid_argument&) {
    throw IoError(manifest.string() + ": malformed value");
  } catch (const std::out_of_range&) {
    throw IoError(manifest.string() + ": value out of range");
  }
  m.validate();
  return cp;
}

}  // namespace dsae

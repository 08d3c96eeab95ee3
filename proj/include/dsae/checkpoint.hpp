#pragma once

// Model checkpoints: network dumps, Xi and mask CSVs, the SVD basis and a
// key=value manifest (model.txt) with everything needed to rebuild the model.

#include <filesystem>

#include "dsae/delaymodel.hpp"

namespace dsae {

// Working coordinates are w = (y - mean) / scale.
struct Standardization {
  double mean = 0.0;
  double scale = 1.0;

  double forward(double y) const { return (y - mean) / scale; }
  double inverse(double w) const { return w * scale + mean; }
  static Standardization fit(std::span<const double> y);
};

MeasurementSeries standardize(const MeasurementSeries& s, const Standardization& st);

struct Checkpoint {
  DelayModel model;
  Standardization standardization;
};

void save_checkpoint(const std::filesystem::path& dir, const DelayModel& model, const Standardization& st);
// Throws IoError naming the first missing file.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Xi in measurement units: the latent model re-expressed for u = scale * z + mean.
SindyModel descale_model(const SindyModel& model, const Standardization& st);

}  // namespace dsae

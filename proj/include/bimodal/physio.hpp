#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bimodal/errors.hpp"

namespace bimodal::physio {

enum class Sensor { heart_rate, skin_conductance, skin_temperature, respiration };
std::string to_string(Sensor s);

struct SensorStream {
  Sensor kind = Sensor::heart_rate;
  double sample_rate = 0;  // Hz
  std::vector<double> samples;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct StreamSet {
  SensorStream heart_rate;
  SensorStream skin_conductance;
  SensorStream skin_temperature;
  SensorStream respiration;
};

// The six statistical descriptors applied to every signal family. The power
// mean is fixed to exponent 2 (root mean square); std uses the population
// denominator n; epoch amplitude is the mean over consecutive fixed-length
// epochs of (epoch max - epoch min), where a trailing partial epoch counts
// when it is at least half an epoch long.
struct Descriptors {
  double max = 0, min = 0, mean = 0, rms = 0, std_dev = 0, epoch_amplitude = 0;
  std::array<double, 6> as_array() const { return {max, min, mean, rms, std_dev, epoch_amplitude}; }
};

Descriptors descriptor_set(std::span<const double> signal, std::size_t epoch_len);

// Strict local maxima above the stream mean, greedily accepted left to right
// with a refractory window. Deterministic and seed free.
std::vector<std::size_t> detect_peaks(std::span<const double> samples, double sample_rate,
                                      double refractory_s = 0.25);

constexpr std::size_t kFeatureCount = 59;
using FeatureVector = std::array<double, kFeatureCount>;

struct FeatureDef {
  std::size_t index;
  std::string name;
  std::string formula;
};

// The fixed 59-slot layout: 40 heart-rate, 5 skin conductance,
// 5 skin temperature, 7 respiration, 2 combined.
const std::vector<FeatureDef>& feature_manifest();
void write_feature_manifest(const std::string& path);

FeatureVector extract_features(const StreamSet& streams);

// ---- PCA --------------------------------------------------------------------

struct PcaModel {
  std::vector<double> mean;                      // input_dim
  std::vector<std::vector<double>> components;   // output_dim rows, orthonormal
  std::vector<double> explained_variance;        // non-increasing

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.size(); }
};

// Mean-centered covariance (denominator n-1) eigendecomposition via cyclic
// Jacobi rotations; keeps the top-k eigenvectors by eigenvalue. The sign of
// each component is fixed so its largest-magnitude entry is positive.
PcaModel pca_fit(const std::vector<std::vector<double>>& rows, std::size_t k);

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> x);

// Full eigendecomposition of a symmetric d x d matrix (row-major, destroyed).
// Eigenvalues come out in descending order; eigenvectors are rows of `vectors`.
void jacobi_eigen_symmetric(std::vector<double> matrix, std::size_t d,
                            std::vector<double>& values, std::vector<double>& vectors);

// ---- stream files -----------------------------------------------------------

// One CSV per recording: a "# sample_rate_hz=<r>" comment line, then the
// header time_s,heart_rate,skin_conductance,skin_temperature,respiration.
StreamSet read_stream_csv(const std::string& path);
void write_stream_csv(const std::string& path, const StreamSet& streams);

void write_feature_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                       const std::vector<FeatureVector>& rows);
void write_pca_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                   const std::vector<std::vector<double>>& rows);

struct PcaTable {
  std::vector<std::string> sample_ids;
  std::vector<std::vector<double>> rows;
};
PcaTable read_pca_csv(const std::string& path);

}  // namespace bimodal::physio

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bimodal/physio.hpp"

namespace bimodal::data {

enum class Topic { abortion, best_friend };
std::string to_string(Topic t);
Topic topic_from_string(const std::string& s);

struct Sample {
  std::string sample_id;
  std::string subject_id;
  std::string gender;  // carried for schema fidelity, unused by the models
  Topic topic = Topic::abortion;
  int label = 0;  // 0 truthful, 1 deceptive
  std::string transcript;
  std::string stream_file;  // relative to the dataset root
};

struct Dataset {
  std::string root;
  std::vector<Sample> samples;

  physio::StreamSet load_streams(const Sample& sample) const;
};

struct GeneratorConfig {
  std::size_t n_subjects = 104;
  std::uint64_t seed = 42;
  // Shift planted in heart-rate/conductance statistics of deceptive
  // recordings, in units of each statistic's population std.
  double phys_effect = 1.0;
  // Probability mass content words draw from the class-specific lists.
  double lex_effect = 0.3;
  double sample_rate_hz = 32.0;
  double duration_s = 60.0;
  std::size_t min_tokens = 30;
  std::size_t max_tokens = 120;
};

// Writes manifest.tsv, transcripts.tsv and streams/<sample_id>.csv under
// out_dir. Each subject contributes one truthful and one deceptive recording
// per topic; byte-identical for identical configs.
Dataset generate_dataset(const GeneratorConfig& config, const std::string& out_dir);

// Validates the pairing/count/label invariants; sensor streams stay on disk
// until load_streams is called.
Dataset load_dataset(const std::string& root);

void save_manifest(const Dataset& dataset, const std::string& path);

// topic is "abortion", "best_friend" or "both"; order is preserved.
std::vector<Sample> filter_topic(const Dataset& dataset, const std::string& topic);

}  // namespace bimodal::data

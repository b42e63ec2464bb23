#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bimodal/data.hpp"
#include "bimodal/ling.hpp"
#include "bimodal/nets.hpp"
#include "bimodal/nn.hpp"
#include "bimodal/physio.hpp"

namespace bimodal::pipe {

// Shuffled membership for one experiment; the first train_count ids train,
// the rest test. Persisted so both modalities consume identical membership.
struct SplitIndex {
  std::uint64_t seed = 0;
  std::vector<std::string> ordered_ids;
  std::size_t train_count = 0;

  std::vector<std::string> train_ids() const;
  std::vector<std::string> test_ids() const;
  void save(const std::string& path) const;
  static SplitIndex load(const std::string& path);
};

// Stratified by (topic, label) with largest-remainder rounding so the train
// side is exactly floor(0.9 n) overall.
SplitIndex split(const std::vector<data::Sample>& samples, std::uint64_t seed);

struct HyperParams {
  std::size_t filters_per_size = 8;
  std::size_t phys_epochs = 300;
  std::size_t ling_epochs = 300;
  std::size_t fusion_epochs = 300;
  double learning_rate = 1e-3;
  std::size_t vocab_cap = 500;
  std::size_t pca_dim = 32;
  ling::SkipgramOptions skipgram;
};

// Everything the per-run trainers consume, computed once per experiment.
// PCA, vocabulary and embeddings are fitted on the training side only; the
// padded transcript length covers train and test so lookups never overflow.
struct FeatureBundle {
  std::vector<std::string> train_ids, test_ids;
  std::map<std::string, int> labels;
  std::map<std::string, nn::Tensor> phys_input;  // standardized PCA projections
  std::map<std::string, nn::Tensor> ling_input;  // padded_len x 32 embeddings
  std::size_t padded_len = 0;

  // raw artifacts, train ids then test ids
  std::vector<std::string> all_ids;
  std::vector<physio::FeatureVector> raw_features;
  std::vector<std::vector<double>> pca_rows;
  physio::PcaModel pca;
  ling::Vocabulary vocab;
  ling::EmbeddingModel embeddings;
};

FeatureBundle preprocess(const data::Dataset& dataset, const std::vector<data::Sample>& train,
                         const std::vector<data::Sample>& test, const HyperParams& hyper,
                         std::uint64_t prep_seed, const std::string& embeddings_file = "");

struct TrainedNet {
  std::unique_ptr<nn::Network> net;
  std::vector<double> loss_curve;  // mean loss per epoch
};

// Full-batch training: one optimizer step per epoch on the mean loss.
TrainedNet train_unimodal(nets::Modality modality, const FeatureBundle& features,
                          const HyperParams& hyper, std::uint64_t seed);

struct ScoreTable {
  std::vector<std::string> ids;
  std::vector<std::array<double, 2>> scores;
};

// Deterministic forward passes with frozen weights.
ScoreTable export_scores(nn::Network& net, nets::Modality modality,
                         const std::vector<std::string>& ids, const FeatureBundle& features);

// Trains the 4 -> 2 fusion head on exported training scores; the unimodal
// nets are not touched.
TrainedNet train_bimodal(const ScoreTable& ling_train, const ScoreTable& phys_train,
                         const std::map<std::string, int>& labels, const HyperParams& hyper,
                         std::uint64_t seed);

struct VoteMatrix {
  std::vector<std::string> test_ids;
  std::vector<std::uint64_t> run_seeds;   // one per row
  std::vector<std::vector<int>> rows;     // runs x test size, entries in {0,1}

  void save(const std::string& path) const;
  static VoteMatrix load(const std::string& path);
};

// Per-column mode; an exact tie goes to deceptive (1).
std::vector<int> majority_vote(const VoteMatrix& votes);
std::vector<int> majority_vote_prefix(const VoteMatrix& votes, std::size_t runs);

struct MetricsReport {
  std::string modality;
  std::string train_topic, test_topic;
  std::size_t runs = 0;
  std::uint64_t base_seed = 0;
  std::string aggregation = "majority_vote";

  std::size_t n = 0, n_truthful = 0, n_deceptive = 0, correct = 0;
  double accuracy = 0.0;
  // A class absent from the truth leaves its recall undefined, not zero.
  std::optional<double> deceptive_recall, truthful_recall;

  std::string to_json_text() const;
  void save(const std::string& path) const;
  static MetricsReport load(const std::string& path);
};

MetricsReport compute_metrics(const std::vector<int>& predictions,
                              const std::vector<int>& truth);

struct ExperimentConfig {
  std::string train_topic = "both";
  std::string test_topic = "both";  // equal to train_topic -> saved 9:1 split
  std::size_t runs = 200;
  std::uint64_t split_seed = 1;
  std::uint64_t prep_seed = 2;
  std::uint64_t base_run_seed = 3;
  bool want_ling = true;
  bool want_phys = true;
  bool want_bimodal = true;
  // Ablation: redraw the split every run and pool metrics over runs instead
  // of voting (vote columns would not line up across different test sets).
  bool resplit_per_run = false;
  std::size_t parallel = 1;
  std::string embeddings_file;  // optional pretrained vectors
  HyperParams hyper;

  std::string serialize() const;  // key=value lines
};

struct ExperimentResult {
  std::optional<SplitIndex> split;                 // within-topic runs only
  std::map<std::string, VoteMatrix> votes;         // keyed by modality name
  std::map<std::string, MetricsReport> reports;
  std::vector<int> test_labels;
};

// R seeded runs -> vote matrices -> voted metrics; persists split, votes,
// reports, feature files and the serialized config under out_dir.
ExperimentResult run_experiment(const data::Dataset& dataset, const ExperimentConfig& config,
                                const std::string& out_dir);

struct StabilityRow {
  std::size_t runs = 0;
  double overall = 0.0;
  std::optional<double> deceptive_recall, truthful_recall;
};

// Voted metrics over nested prefixes of one vote matrix.
std::vector<StabilityRow> stability_analysis(const VoteMatrix& votes,
                                             const std::vector<int>& truth,
                                             const std::vector<std::size_t>& run_counts);
void write_stability_csv(const std::string& path, const std::vector<StabilityRow>& rows);

}  // namespace bimodal::pipe

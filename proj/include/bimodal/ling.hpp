#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bimodal/nn.hpp"

namespace bimodal::ling {

// Strips bracketed annotations like "[laughs]", lowercases, and keeps maximal
// runs of letters/digits as tokens. Numerals survive; punctuation does not.
std::vector<std::string> clean_transcript(const std::string& text);

// word -> id map; ids 1..cap by descending frequency with alphabetical
// tie-break. Id 0 is reserved for unknown words and padding.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          std::size_t cap = 500);

  std::size_t id(const std::string& word) const;  // 0 when absent
  bool contains(const std::string& word) const { return id(word) != 0; }
  std::size_t size() const { return words_.size(); }
  // (word, corpus count) in id order; entry i has id i+1.
  const std::vector<std::pair<std::string, std::size_t>>& entries() const { return words_; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::size_t>> words_;
  std::vector<std::pair<std::string, std::size_t>> sorted_;  // word -> id, sorted by word
  void rebuild_index();
};

struct CorpusStats {
  std::size_t max_len = 0;
  std::vector<std::size_t> lengths;

  static CorpusStats compute(const std::vector<std::vector<std::string>>& corpus);
  // Conv geometry needs at least as many rows as the largest filter side.
  static constexpr std::size_t kMinRows = 5;
  std::size_t padded_len() const { return std::max(max_len, kMinRows); }
};

// (vocab size + 1) x dim matrix; row 0 is pinned to zero so the UNK/pad id
// looks up a zero vector.
struct EmbeddingModel {
  std::size_t dim = 32;
  std::size_t vocab_size = 0;
  std::vector<double> matrix;  // (vocab_size + 1) * dim

  std::size_t rows() const { return vocab_size + 1; }
  std::span<const double> row(std::size_t id) const;
};

struct SkipgramOptions {
  std::size_t dim = 32;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 15;
  double learning_rate = 0.025;  // linearly decayed over all pairs
  std::uint64_t seed = 0;
};

struct SkipgramResult {
  EmbeddingModel model;
  std::vector<double> epoch_loss;  // mean pair loss per epoch
};

// Skip-gram with negative sampling over in-vocabulary tokens; out-of-vocabulary
// tokens are dropped before windows are formed, the negative distribution is
// unigram^0.75, and row 0 is never touched.
SkipgramResult train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const Vocabulary& vocab, const SkipgramOptions& options);

struct EmbeddingLoadReport {
  std::vector<std::string> missing;  // vocabulary words absent from the file
};

// Text format: "<word_count> <dim>" then one "<word> <v1> ... <vdim>" per line.
EmbeddingModel load_embeddings(const std::string& path, const Vocabulary& vocab,
                               EmbeddingLoadReport* report = nullptr);
void save_embeddings(const std::string& path, const Vocabulary& vocab,
                     const EmbeddingModel& model);

// Token ids padded with 0 to padded_len; unknown words also map to 0.
std::vector<std::size_t> vectorize(const std::vector<std::string>& tokens,
                                   const Vocabulary& vocab, std::size_t padded_len);

struct EmbeddedTranscript {
  nn::Tensor array;  // padded_len x dim
  std::size_t true_length = 0;
};
EmbeddedTranscript embed(const std::vector<std::size_t>& ids, const EmbeddingModel& model);

// Tab-separated interchange format: sample_id, subject_id, topic, label, text.
struct CorpusRecord {
  std::string sample_id;
  std::string subject_id;
  std::string topic;
  int label = 0;
  std::string text;
};
std::vector<CorpusRecord> read_corpus_file(const std::string& path);
void write_corpus_file(const std::string& path, const std::vector<CorpusRecord>& records);

}  // namespace bimodal::ling

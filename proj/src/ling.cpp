#include "bimodal/ling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "bimodal/rng.hpp"
#include "bimodal/textio.hpp"

namespace bimodal::ling {

std::vector<std::string> clean_transcript(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  bool in_bracket = false;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (in_bracket) {
      if (raw == ']') in_bracket = false;
      continue;
    }
    if (raw == '[') {
      // annotation; an unterminated bracket swallows the rest of the line
      in_bracket = true;
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
      continue;
    }
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

// ---- Vocabulary ---------------------------------------------------------------

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             std::size_t cap) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& doc : corpus)
    for (const auto& tok : doc) ++counts[tok];
  if (counts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > cap) ranked.resize(cap);

  Vocabulary vocab;
  vocab.words_ = std::move(ranked);
  vocab.rebuild_index();
  return vocab;
}

void Vocabulary::rebuild_index() {
  sorted_.clear();
  sorted_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) sorted_.emplace_back(words_[i].first, i + 1);
  std::sort(sorted_.begin(), sorted_.end());
}

std::size_t Vocabulary::id(const std::string& word) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), word,
                             [](const auto& e, const std::string& w) { return e.first < w; });
  if (it != sorted_.end() && it->first == word) return it->second;
  return 0;
}

void Vocabulary::save(const std::string& path) const {
  std::ostringstream out;
  out << "id\tword\tcount\n";
  for (std::size_t i = 0; i < words_.size(); ++i)
    out << (i + 1) << '\t' << words_[i].first << '\t' << words_[i].second << '\n';
  write_text_file(path, out.str());
}

Vocabulary Vocabulary::load(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "id\tword\tcount")
    throw IoError(path + ":1: expected vocabulary header");
  Vocabulary vocab;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_on(lines[ln], '\t');
    if (fields.size() != 3)
      throw IoError(path + ":" + std::to_string(ln + 1) + ": malformed vocabulary row");
    const auto id = static_cast<std::size_t>(std::stoull(fields[0]));
    if (id != vocab.words_.size() + 1)
      throw IoError(path + ":" + std::to_string(ln + 1) + ": ids must be contiguous from 1");
    vocab.words_.emplace_back(fields[1], static_cast<std::size_t>(std::stoull(fields[2])));
  }
  vocab.rebuild_index();
  return vocab;
}

CorpusStats CorpusStats::compute(const std::vector<std::vector<std::string>>& corpus) {
  CorpusStats stats;
  stats.lengths.reserve(corpus.size());
  for (const auto& doc : corpus) {
    stats.lengths.push_back(doc.size());
    stats.max_len = std::max(stats.max_len, doc.size());
  }
  if (stats.max_len == 0) stats.max_len = 1;
  return stats;
}

// ---- embeddings -----------------------------------------------------------------

std::span<const double> EmbeddingModel::row(std::size_t id) const {
  if (id >= rows()) throw DataError("embedding row " + std::to_string(id) + " out of range");
  return {matrix.data() + id * dim, dim};
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct NegativeSampler {
  std::vector<double> cumulative;  // over ids 1..V

  explicit NegativeSampler(const Vocabulary& vocab) {
    cumulative.reserve(vocab.size());
    double total = 0;
    for (const auto& [word, count] : vocab.entries()) {
      total += std::pow(static_cast<double>(count), 0.75);
      cumulative.push_back(total);
    }
  }

  std::size_t draw(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, cumulative.back());
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u(rng));
    return static_cast<std::size_t>(it - cumulative.begin()) + 1;
  }
};

}  // namespace

SkipgramResult train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                              const Vocabulary& vocab, const SkipgramOptions& options) {
  if (options.dim == 0 || options.window == 0 || options.negatives == 0)
    throw ConfigError("skip-gram hyperparameters must be positive");

  // Out-of-vocabulary tokens never act as centers or contexts.
  std::vector<std::vector<std::size_t>> sentences;
  std::size_t total_tokens = 0;
  for (const auto& doc : corpus) {
    std::vector<std::size_t> ids;
    for (const auto& tok : doc) {
      const std::size_t id = vocab.id(tok);
      if (id != 0) ids.push_back(id);
    }
    total_tokens += ids.size();
    if (ids.size() >= 2) sentences.push_back(std::move(ids));
  }
  if (total_tokens == 0) throw DataError("skip-gram corpus has no in-vocabulary tokens");

  SkipgramResult result;
  EmbeddingModel& model = result.model;
  model.dim = options.dim;
  model.vocab_size = vocab.size();
  model.matrix.assign(model.rows() * model.dim, 0.0);

  auto rng = make_engine(options.seed);
  {
    // word2vec-style init: small uniform input vectors, zero context vectors.
    std::uniform_real_distribution<double> u(-0.5 / static_cast<double>(model.dim),
                                             0.5 / static_cast<double>(model.dim));
    for (std::size_t id = 1; id < model.rows(); ++id)
      for (std::size_t j = 0; j < model.dim; ++j) model.matrix[id * model.dim + j] = u(rng);
  }
  std::vector<double> context(model.rows() * model.dim, 0.0);

  NegativeSampler sampler(vocab);

  std::size_t total_pairs = 0;
  for (const auto& s : sentences)
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t lo = i >= options.window ? i - options.window : 0;
      const std::size_t hi = std::min(s.size(), i + options.window + 1);
      total_pairs += hi - lo - 1;
    }
  const double total_steps =
      static_cast<double>(std::max<std::size_t>(1, total_pairs * options.epochs));

  std::vector<double> grad_center(model.dim);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double epoch_loss = 0;
    std::size_t epoch_pairs = 0;
    for (const auto& s : sentences) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::size_t center = s[i];
        double* vc = model.matrix.data() + center * model.dim;
        const std::size_t lo = i >= options.window ? i - options.window : 0;
        const std::size_t hi = std::min(s.size(), i + options.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          const double lr = options.learning_rate *
                            std::max(1e-4, 1.0 - static_cast<double>(step) / total_steps);
          ++step;
          std::fill(grad_center.begin(), grad_center.end(), 0.0);
          double pair_loss = 0;

          auto update = [&](std::size_t target, double label) {
            double* ct = context.data() + target * model.dim;
            double dot = 0;
            for (std::size_t kk = 0; kk < model.dim; ++kk) dot += vc[kk] * ct[kk];
            const double pred = sigmoid(dot);
            pair_loss += label > 0.5 ? -std::log(std::max(pred, 1e-12))
                                     : -std::log(std::max(1.0 - pred, 1e-12));
            const double g = (label - pred) * lr;
            for (std::size_t kk = 0; kk < model.dim; ++kk) {
              grad_center[kk] += g * ct[kk];
              ct[kk] += g * vc[kk];
            }
          };

          update(s[j], 1.0);
          for (std::size_t neg = 0; neg < options.negatives; ++neg) {
            const std::size_t sample = sampler.draw(rng);
            if (sample == s[j]) continue;
            update(sample, 0.0);
          }
          for (std::size_t kk = 0; kk < model.dim; ++kk) vc[kk] += grad_center[kk];
          epoch_loss += pair_loss;
          ++epoch_pairs;
        }
      }
    }
    result.epoch_loss.push_back(epoch_pairs ? epoch_loss / static_cast<double>(epoch_pairs)
                                            : 0.0);
  }
  return result;
}

EmbeddingModel load_embeddings(const std::string& path, const Vocabulary& vocab,
                               EmbeddingLoadReport* report) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw IoError(path + ": empty embedding file");

  std::size_t word_count = 0, dim = 0;
  {
    std::istringstream header(lines[0]);
    header >> word_count >> dim;
    if (header.fail() || dim == 0)
      throw IoError(path + ":1: expected '<word_count> <dim>' header");
  }

  std::unordered_map<std::string, std::vector<double>> file_rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    std::istringstream row(lines[ln]);
    std::string word;
    row >> word;
    std::vector<double> values(dim);
    for (auto& v : values) row >> v;
    if (row.fail() || word.empty())
      throw IoError(path + ":" + std::to_string(ln + 1) + ": malformed embedding row");
    file_rows[word] = std::move(values);
  }
  if (file_rows.size() != word_count)
    throw IoError(path + ": header promises " + std::to_string(word_count) + " words, found " +
                  std::to_string(file_rows.size()));

  EmbeddingModel model;
  model.dim = dim;
  model.vocab_size = vocab.size();
  model.matrix.assign(model.rows() * dim, 0.0);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const std::string& word = vocab.entries()[i].first;
    auto it = file_rows.find(word);
    if (it == file_rows.end()) {
      if (report) report->missing.push_back(word);
      continue;  // stays a zero row
    }
    std::copy(it->second.begin(), it->second.end(), model.matrix.begin() + (i + 1) * dim);
  }
  return model;
}

void save_embeddings(const std::string& path, const Vocabulary& vocab,
                     const EmbeddingModel& model) {
  if (model.vocab_size != vocab.size())
    throw DataError("embedding model does not match the vocabulary size");
  std::ostringstream out;
  out << vocab.size() << ' ' << model.dim << '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab.entries()[i].first;
    const auto row = model.row(i + 1);
    for (double v : row) out << ' ' << fmt_g17(v);
    out << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<std::size_t> vectorize(const std::vector<std::string>& tokens,
                                   const Vocabulary& vocab, std::size_t padded_len) {
  if (tokens.size() > padded_len)
    throw DataError("transcript has " + std::to_string(tokens.size()) +
                    " tokens, longer than the padded length " + std::to_string(padded_len));
  std::vector<std::size_t> ids(padded_len, 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) ids[i] = vocab.id(tokens[i]);
  return ids;
}

EmbeddedTranscript embed(const std::vector<std::size_t>& ids, const EmbeddingModel& model) {
  EmbeddedTranscript out;
  out.array = nn::Tensor({ids.size(), model.dim});
  out.true_length = ids.size();
  while (out.true_length > 0 && ids[out.true_length - 1] == 0) --out.true_length;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = model.row(ids[i]);  // throws on out-of-range ids
    std::copy(row.begin(), row.end(), out.array.data() + i * model.dim);
  }
  return out;
}

std::vector<CorpusRecord> read_corpus_file(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<CorpusRecord> records;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_on(lines[ln], '\t');
    if (fields.size() != 5)
      throw IoError(path + ":" + std::to_string(ln + 1) + ": expected 5 tab-separated fields");
    CorpusRecord rec;
    rec.sample_id = fields[0];
    rec.subject_id = fields[1];
    rec.topic = fields[2];
    rec.label = std::stoi(fields[3]);
    rec.text = unescape_field(fields[4]);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_corpus_file(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ostringstream out;
  for (const auto& rec : records)
    out << rec.sample_id << '\t' << rec.subject_id << '\t' << rec.topic << '\t' << rec.label
        << '\t' << escape_field(rec.text) << '\n';
  write_text_file(path, out.str());
}

}  // namespace bimodal::ling

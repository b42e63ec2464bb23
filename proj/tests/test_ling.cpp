#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "bimodal/ling.hpp"
#include "bimodal/nn.hpp"
#include "bimodal/rng.hpp"
#include "bimodal/textio.hpp"

using namespace bimodal;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb) + 1e-12);
}

}  // namespace

TEST_CASE("transcript cleaning") {
  CHECK(ling::clean_transcript("I think, [coughs] it's WRONG!") ==
        std::vector<std::string>{"i", "think", "it", "s", "wrong"});
  CHECK(ling::clean_transcript("").empty());
  CHECK(ling::clean_transcript("123 times") == std::vector<std::string>{"123", "times"});
  CHECK(ling::clean_transcript("[laughs][pause]").empty());
  CHECK(ling::clean_transcript("so [unterminated annotation") ==
        std::vector<std::string>{"so"});
}

TEST_CASE("vocabulary build, cap and tie-break") {
  CHECK(ling::Vocabulary::build({{"a", "a", "b"}}, 2).id("a") == 1);
  CHECK(ling::Vocabulary::build({{"a", "a", "b"}}, 2).id("b") == 2);

  const auto tied = ling::Vocabulary::build({{"b", "b", "a", "a"}}, 2);
  CHECK(tied.id("a") == 1);  // alphabetical on equal counts
  CHECK(tied.id("b") == 2);

  CHECK_THROWS_AS(ling::Vocabulary::build({}, 500), DataError);
  CHECK_THROWS_AS(ling::Vocabulary::build({{}, {}}, 500), DataError);
}

TEST_CASE("vocabulary keeps exactly the 500 most frequent of 600 words") {
  std::vector<std::vector<std::string>> corpus;
  for (int w = 0; w < 600; ++w) {
    // word w occurs w+1 times; the 100 rarest (fewest repeats) must fall out
    std::vector<std::string> doc(static_cast<std::size_t>(w + 1),
                                 "word" + std::to_string(w));
    corpus.push_back(std::move(doc));
  }
  const auto vocab = ling::Vocabulary::build(corpus, 500);
  CHECK(vocab.size() == 500);
  for (int w = 0; w < 100; ++w) CHECK(vocab.id("word" + std::to_string(w)) == 0);
  for (int w = 100; w < 600; ++w) CHECK(vocab.id("word" + std::to_string(w)) != 0);
  CHECK(vocab.id("word599") == 1);  // most frequent

  // frequency-sort oracle: rank by (count desc, word asc)
  std::vector<std::pair<std::string, std::size_t>> expected;
  for (int w = 100; w < 600; ++w)
    expected.emplace_back("word" + std::to_string(w), static_cast<std::size_t>(w + 1));
  std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(vocab.id(expected[i].first) == i + 1);
}

TEST_CASE("vocabulary size cap holds on random corpora") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> n_words(1, 900);
    std::uniform_int_distribution<int> word(0, 700);
    std::vector<std::string> doc;
    const int total = n_words(rng);
    for (int i = 0; i < total; ++i) doc.push_back("w" + std::to_string(word(rng)));
    const auto vocab = ling::Vocabulary::build({doc}, 500);
    std::set<std::string> distinct(doc.begin(), doc.end());
    CHECK(vocab.size() == std::min<std::size_t>(500, distinct.size()));
    for (const auto& [w, count] : vocab.entries()) CHECK(vocab.id(w) != 0);
  }
}

TEST_CASE("skip-gram separates planted co-occurrence across seeds") {
  // x and y always share a window; x and z never meet.
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 150; ++i) {
    corpus.push_back({"x", "y", "a", "b"});
    corpus.push_back({"y", "x", "c", "a"});
    corpus.push_back({"z", "d", "e", "f"});
    corpus.push_back({"z", "e", "d", "f"});
  }
  const auto vocab = ling::Vocabulary::build(corpus, 500);

  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ling::SkipgramOptions opt;
    opt.window = 2;
    opt.epochs = 4;
    opt.seed = seed;
    const auto result = ling::train_skipgram(corpus, vocab, opt);
    const auto& m = result.model;
    if (cosine(m.row(vocab.id("x")), m.row(vocab.id("y"))) >
        cosine(m.row(vocab.id("x")), m.row(vocab.id("z"))))
      ++wins;

    CHECK(result.epoch_loss.back() < result.epoch_loss.front());
    // row 0 stays the zero vector
    for (double v : m.row(0)) CHECK(v == 0);
  }
  CHECK(wins >= 9);
}

TEST_CASE("zero skip-gram epochs return the seeded initialization") {
  const std::vector<std::vector<std::string>> corpus{{"a", "b", "a", "c"}};
  const auto vocab = ling::Vocabulary::build(corpus, 500);
  ling::SkipgramOptions opt;
  opt.epochs = 0;
  opt.seed = 9;
  const auto a = ling::train_skipgram(corpus, vocab, opt);
  const auto b = ling::train_skipgram(corpus, vocab, opt);
  CHECK(a.model.matrix == b.model.matrix);
  bool any_nonzero = false;
  for (std::size_t id = 1; id < a.model.rows(); ++id)
    for (double v : a.model.row(id)) any_nonzero |= (v != 0);
  CHECK(any_nonzero);
}

TEST_CASE("embedding save / load round-trip and missing-word report") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "bimodal_ling_test";
  fs::create_directories(dir);
  const std::string path = (dir / "embeddings.txt").string();

  const std::vector<std::vector<std::string>> corpus{{"alpha", "beta", "alpha", "gamma"}};
  const auto vocab = ling::Vocabulary::build(corpus, 500);
  ling::SkipgramOptions opt;
  opt.epochs = 2;
  opt.seed = 3;
  const auto trained = ling::train_skipgram(corpus, vocab, opt);
  ling::save_embeddings(path, vocab, trained.model);

  const auto loaded = ling::load_embeddings(path, vocab);
  CHECK(loaded.matrix == trained.model.matrix);  // value-exact round-trip

  // a file that lacks one vocabulary word: zero row + report
  std::string halves = "2 32\nalpha", ones = "\nbeta";
  for (int i = 0; i < 32; ++i) {
    halves += " 0.5";
    ones += " -1";
  }
  write_text_file(path, halves + ones + "\n");
  ling::EmbeddingLoadReport report;
  const auto partial = ling::load_embeddings(path, vocab, &report);
  REQUIRE(report.missing == std::vector<std::string>{"gamma"});
  for (double v : partial.row(vocab.id("gamma"))) CHECK(v == 0);
  for (double v : partial.row(vocab.id("alpha"))) CHECK(v == 0.5);

  // header "2 32" with 2 word rows -> 3 x 32 model
  CHECK(partial.rows() == vocab.size() + 1);

  write_text_file(path, "1 32\nalpha 1 2 three\n");
  CHECK_THROWS_WITH_AS(ling::load_embeddings(path, vocab), doctest::Contains(":2:"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("vectorize pads, maps unknowns to zero and rejects overflow") {
  ling::Vocabulary vocab = ling::Vocabulary::build({{"hello"}}, 500);
  CHECK(ling::vectorize({"hello"}, vocab, 4) == std::vector<std::size_t>{1, 0, 0, 0});
  CHECK(ling::vectorize({"zzz"}, vocab, 2) == std::vector<std::size_t>{0, 0});
  CHECK(ling::vectorize({}, vocab, 3) == std::vector<std::size_t>{0, 0, 0});
  CHECK_THROWS_AS(ling::vectorize({"a", "b", "c"}, vocab, 2), DataError);
}

TEST_CASE("embed looks rows up verbatim") {
  ling::EmbeddingModel model;
  model.dim = 4;
  model.vocab_size = 2;
  model.matrix = {0, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8};

  const auto zeros = ling::embed({0, 0, 0}, model);
  CHECK(zeros.true_length == 0);
  for (std::size_t i = 0; i < zeros.array.size(); ++i) CHECK(zeros.array[i] == 0);

  const auto repeated = ling::embed({2, 2}, model);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(repeated.array[i * 4 + j] == model.matrix[2 * 4 + j]);

  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> id(0, 2);
  std::vector<std::size_t> ids(7);
  for (auto& v : ids) v = id(rng);
  const auto out = ling::embed(ids, model);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(out.array[i * 4 + j] == model.matrix[ids[i] * 4 + j]);

  CHECK_THROWS_AS(ling::embed({3}, model), DataError);
}

TEST_CASE("padding extension preserves the non-pad window set") {
  ling::EmbeddingModel model;
  model.dim = 8;
  model.vocab_size = 3;
  model.matrix.assign(4 * 8, 0.0);
  auto rng = make_engine(12);
  std::uniform_real_distribution<double> val(-1, 1);
  for (std::size_t i = 8; i < model.matrix.size(); ++i) model.matrix[i] = val(rng);

  const std::vector<std::size_t> short_ids{1, 3, 2, 0, 0, 0};       // padded to 6
  const std::vector<std::size_t> long_ids{1, 3, 2, 0, 0, 0, 0, 0};  // padded to 8
  const auto a = ling::embed(short_ids, model);
  const auto b = ling::embed(long_ids, model);
  CHECK(a.true_length == b.true_length);

  nn::Tensor kernel({1, 3, 3});
  for (std::size_t i = 0; i < kernel.size(); ++i) kernel[i] = val(rng);
  const nn::Tensor bias = nn::Tensor::vector({0.1});
  const nn::Tensor conv_a = nn::conv2d_forward(a.array, kernel, bias);
  const nn::Tensor conv_b = nn::conv2d_forward(b.array, kernel, bias);
  // every window of the shorter array appears verbatim in the longer one
  for (std::size_t i = 0; i < conv_a.size(); ++i) CHECK(conv_a[i] == conv_b[i]);
}

TEST_CASE("pipeline from text to ids is a pure function of the corpus") {
  const std::vector<std::string> raw{"The cat, [pause] the hat!", "THE Cat sat."};
  std::vector<std::vector<std::string>> tokens;
  for (const auto& t : raw) tokens.push_back(ling::clean_transcript(t));
  const auto stats = ling::CorpusStats::compute(tokens);
  CHECK(stats.max_len == 4);
  CHECK(stats.padded_len() == 5);  // floor for the largest filter side

  const auto vocab = ling::Vocabulary::build(tokens, 500);
  const auto ids_a = ling::vectorize(tokens[0], vocab, stats.padded_len());
  const auto ids_b = ling::vectorize(tokens[0], vocab, stats.padded_len());
  CHECK(ids_a == ids_b);
  CHECK(vocab.id("the") == 1);  // 3 occurrences
}

TEST_CASE("corpus interchange file round-trips") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "bimodal_corpus_test";
  fs::create_directories(dir);
  const std::string path = (dir / "corpus.tsv").string();
  const std::vector<ling::CorpusRecord> records{
      {"s001_abortion_t", "s001", "abortion", 0, "I think it is fine."},
      {"s001_abortion_d", "s001", "abortion", 1, "line with\ttab and\nnewline"},
  };
  ling::write_corpus_file(path, records);
  const auto loaded = ling::read_corpus_file(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].sample_id == records[0].sample_id);
  CHECK(loaded[1].text == records[1].text);
  CHECK(loaded[1].label == 1);
  fs::remove_all(dir);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "bimodal/data.hpp"
#include "bimodal/textio.hpp"

using namespace bimodal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

data::GeneratorConfig small_config(std::uint64_t seed = 1) {
  data::GeneratorConfig cfg;
  cfg.n_subjects = 10;
  cfg.seed = seed;
  cfg.duration_s = 8;
  cfg.sample_rate_hz = 32;
  cfg.min_tokens = 10;
  cfg.max_tokens = 25;
  return cfg;
}

// Mean of a stream channel straight from the csv, bypassing the extractor.
double planted_conductance_mean(const data::Dataset& dataset, const data::Sample& sample) {
  const auto streams = dataset.load_streams(sample);
  double sum = 0;
  for (double v : streams.skin_conductance.samples) sum += v;
  return sum / static_cast<double>(streams.skin_conductance.samples.size());
}

}  // namespace

TEST_CASE("generator produces the paired schema at small scale") {
  TempDir dir("bimodal_data_gen");
  const auto dataset = data::generate_dataset(small_config(), dir.str());
  CHECK(dataset.samples.size() == 40);  // 10 subjects x 2 topics x 2 labels

  std::map<std::pair<std::string, data::Topic>, std::array<int, 2>> pairing;
  for (const auto& s : dataset.samples) {
    CHECK((s.label == 0 || s.label == 1));
    ++pairing[{s.subject_id, s.topic}][static_cast<std::size_t>(s.label)];
    CHECK(fs::exists(fs::path(dir.str()) / s.stream_file));
    CHECK(!s.transcript.empty());
  }
  CHECK(pairing.size() == 20);
  for (const auto& [key, counts] : pairing) {
    CHECK(counts[0] == 1);
    CHECK(counts[1] == 1);
  }
}

TEST_CASE("same seed regenerates byte-identical files") {
  TempDir a("bimodal_data_a"), b("bimodal_data_b");
  data::generate_dataset(small_config(7), a.str());
  data::generate_dataset(small_config(7), b.str());
  for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a.path);
    CHECK(read_text_file(entry.path().string()) ==
          read_text_file((b.path / rel).string()));
  }
  // a different seed must not reproduce the same transcripts
  TempDir c("bimodal_data_c");
  data::generate_dataset(small_config(8), c.str());
  CHECK(read_text_file((a.path / "transcripts.tsv").string()) !=
        read_text_file((c.path / "transcripts.tsv").string()));
}

TEST_CASE("load validates and round-trips the manifest byte for byte") {
  TempDir dir("bimodal_data_roundtrip");
  data::generate_dataset(small_config(3), dir.str());
  const auto loaded = data::load_dataset(dir.str());
  CHECK(loaded.samples.size() == 40);

  const std::string original = read_text_file((dir.path / "manifest.tsv").string());
  data::save_manifest(loaded, (dir.path / "resaved.tsv").string());
  CHECK(read_text_file((dir.path / "resaved.tsv").string()) == original);
}

TEST_CASE("schema violations are reported") {
  TempDir dir("bimodal_data_schema");
  data::generate_dataset(small_config(4), dir.str());

  const std::string manifest_path = (dir.path / "manifest.tsv").string();
  const std::string manifest = read_text_file(manifest_path);

  // duplicated sample id
  {
    const auto lines = split_on(manifest, '\n');
    std::string doubled = manifest + lines[1] + "\n";
    write_text_file(manifest_path, doubled);
    CHECK_THROWS_WITH_AS(data::load_dataset(dir.str()), doctest::Contains("duplicated"),
                         DataError);
  }
  // broken pairing: drop one deceptive row
  {
    std::string no_pair;
    bool dropped = false;
    for (const auto& line : split_on(manifest, '\n')) {
      if (!dropped && line.find("_abortion_d") != std::string::npos) {
        dropped = true;
        continue;
      }
      if (!line.empty()) no_pair += line + "\n";
    }
    write_text_file(manifest_path, no_pair);
    CHECK_THROWS_WITH_AS(data::load_dataset(dir.str()), doctest::Contains("pairing"),
                         DataError);
  }
  write_text_file(manifest_path, manifest);

  // deleted stream file surfaces on access, by name
  const auto loaded = data::load_dataset(dir.str());
  const auto& victim = loaded.samples[3];
  fs::remove(dir.path / victim.stream_file);
  CHECK_THROWS_WITH_AS(loaded.load_streams(victim), doctest::Contains(victim.sample_id.c_str()),
                       IoError);
}

TEST_CASE("topic filter") {
  TempDir dir("bimodal_data_topic");
  const auto dataset = data::generate_dataset(small_config(5), dir.str());
  CHECK(data::filter_topic(dataset, "abortion").size() == 20);
  CHECK(data::filter_topic(dataset, "best_friend").size() == 20);
  CHECK(data::filter_topic(dataset, "both").size() == 40);
  std::size_t deceptive = 0;
  for (const auto& s : data::filter_topic(dataset, "best_friend"))
    if (s.label == 1) ++deceptive;
  CHECK(deceptive == 10);
  CHECK_THROWS_AS(data::filter_topic(dataset, "politics"), ConfigError);
}

TEST_CASE("gender split matches 53/104 at scale") {
  TempDir dir("bimodal_data_gender");
  data::GeneratorConfig cfg = small_config(6);
  cfg.n_subjects = 104;
  cfg.duration_s = 0.5;  // keep the fixture tiny; streams are irrelevant here
  cfg.min_tokens = 3;
  cfg.max_tokens = 5;
  const auto dataset = data::generate_dataset(cfg, dir.str());
  CHECK(dataset.samples.size() == 416);
  std::map<std::string, std::string> gender_by_subject;
  for (const auto& s : dataset.samples) gender_by_subject[s.subject_id] = s.gender;
  std::size_t females = 0;
  for (const auto& [subject, gender] : gender_by_subject)
    if (gender == "female") ++females;
  CHECK(females == 53);
}

TEST_CASE("higher planted effect sizes separate the classes more") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto accuracy_at = [&](double effect) {
      TempDir dir("bimodal_data_effect_" + std::to_string(seed) + "_" +
                  std::to_string(static_cast<int>(effect * 10)));
      data::GeneratorConfig cfg = small_config(100 + seed);
      cfg.n_subjects = 30;
      cfg.duration_s = 4;
      cfg.phys_effect = effect;
      const auto dataset = data::generate_dataset(cfg, dir.str());

      // threshold classifier on the planted conductance mean: fit on the
      // first half of subjects, evaluate on the second half
      std::vector<std::pair<double, int>> train, test;
      for (const auto& s : dataset.samples) {
        const double value = planted_conductance_mean(dataset, s);
        (s.subject_id <= "s015" ? train : test).push_back({value, s.label});
      }
      double mean0 = 0, mean1 = 0;
      std::size_t n0 = 0, n1 = 0;
      for (const auto& [v, y] : train) (y ? mean1 : mean0) += v, ++(y ? n1 : n0);
      mean0 /= static_cast<double>(n0);
      mean1 /= static_cast<double>(n1);
      const double threshold = 0.5 * (mean0 + mean1);
      std::size_t correct = 0;
      for (const auto& [v, y] : test)
        if ((v > threshold ? 1 : 0) == y) ++correct;
      return static_cast<double>(correct) / static_cast<double>(test.size());
    };
    if (accuracy_at(2.0) > accuracy_at(0.5)) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("zero effect sizes leave the classes indistinguishable") {
  double total = 0;
  const int seeds = 10;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    TempDir dir("bimodal_data_null_" + std::to_string(seed));
    data::GeneratorConfig cfg = small_config(200 + seed);
    cfg.n_subjects = 30;
    cfg.duration_s = 4;
    cfg.phys_effect = 0.0;
    cfg.lex_effect = 0.0;
    const auto dataset = data::generate_dataset(cfg, dir.str());
    std::vector<std::pair<double, int>> train, test;
    for (const auto& s : dataset.samples) {
      const double value = planted_conductance_mean(dataset, s);
      (s.subject_id <= "s015" ? train : test).push_back({value, s.label});
    }
    double mean0 = 0, mean1 = 0;
    std::size_t n0 = 0, n1 = 0;
    for (const auto& [v, y] : train) (y ? mean1 : mean0) += v, ++(y ? n1 : n0);
    const double threshold = 0.5 * (mean0 / static_cast<double>(n0) +
                                    mean1 / static_cast<double>(n1));
    std::size_t correct = 0;
    for (const auto& [v, y] : test)
      if ((v > threshold ? 1 : 0) == y) ++correct;
    total += static_cast<double>(correct) / static_cast<double>(test.size());
  }
  CHECK(total / seeds > 0.45);
  CHECK(total / seeds < 0.55);
}

#include "bimodal/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "bimodal/rng.hpp"
#include "bimodal/textio.hpp"

namespace fs = std::filesystem;

namespace bimodal::data {

std::string to_string(Topic t) {
  return t == Topic::abortion ? "abortion" : "best_friend";
}

Topic topic_from_string(const std::string& s) {
  if (s == "abortion") return Topic::abortion;
  if (s == "best_friend") return Topic::best_friend;
  throw ConfigError("unknown topic: " + s);
}

namespace {

const std::vector<std::string> kFunctionWords = {
    "i",    "think", "that", "the",  "a",     "it",    "is",     "was",   "my",    "to",
    "and",  "of",    "in",   "we",   "you",   "really", "very",  "just",  "so",    "but",
    "because", "about", "feel", "felt", "say", "said",  "know",  "well",  "like",  "time",
    "people", "thing", "way", "also", "maybe", "quite", "often", "always", "never", "still"};

const std::vector<std::string> kAbortionWords = {
    "abortion", "law",     "rights",  "choice",  "life",    "moral",   "debate",  "policy",
    "court",    "decision", "women",  "health",  "body",    "belief",  "religion", "society",
    "freedom",  "opinion", "issue",   "question", "argument", "view",  "stance",  "ethics",
    "legal",    "case",    "state",   "vote",    "support", "oppose",  "term",    "clinic",
    "doctor",   "family",  "child",   "future",  "risk",    "care",    "matter",  "value"};

const std::vector<std::string> kBestFriendWords = {
    "friend",  "kind",     "funny",   "loyal",    "smart",   "caring",  "honest",   "warm",
    "generous", "school",  "college", "years",    "met",     "together", "laugh",   "stories",
    "trust",   "helpful",  "patient", "brave",    "calm",    "cheerful", "thoughtful", "sweet",
    "gentle",  "clever",   "reliable", "supportive", "fun",   "shared",  "memories", "travel",
    "games",   "music",    "movies",  "dinner",   "weekend", "advice",  "heart",    "person"};

// Class-tilted vocabulary, disjoint from the pools above.
const std::vector<std::string> kAbortionTruthful = {
    "perhaps", "possibly", "somewhat", "generally", "usually",   "mostly",
    "fairly",  "rather",   "slightly", "partly",    "sometimes", "occasionally"};
const std::vector<std::string> kAbortionDeceptive = {
    "definitely", "absolutely", "certainly", "honestly",  "swear",   "truly",
    "totally",    "completely", "frankly",   "genuinely", "obviously", "clearly"};
const std::vector<std::string> kBestFriendTruthful = {
    "nice",  "good",  "decent", "solid",  "steady", "plain",
    "simple", "modest", "quiet", "humble", "easy",  "fine"};
const std::vector<std::string> kBestFriendDeceptive = {
    "amazing", "incredible", "perfect", "wonderful", "fantastic", "flawless",
    "ideal",   "brilliant",  "superb",  "magnificent", "stunning", "remarkable"};

const std::vector<std::string> kAnnotations = {"[laughs]", "[pause]", "[coughs]", "[sighs]"};

std::string make_transcript(Topic topic, int label, const GeneratorConfig& cfg,
                            std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len_dist(cfg.min_tokens, cfg.max_tokens);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& topic_words = topic == Topic::abortion ? kAbortionWords : kBestFriendWords;
  const auto& class_words =
      topic == Topic::abortion ? (label == 1 ? kAbortionDeceptive : kAbortionTruthful)
                               : (label == 1 ? kBestFriendDeceptive : kBestFriendTruthful);

  auto pick = [&rng](const std::vector<std::string>& pool) -> const std::string& {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
  };

  const std::size_t n_tokens = len_dist(rng);
  std::string text;
  std::size_t since_period = 0;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    std::string word;
    if (u(rng) < 0.45) {
      word = pick(kFunctionWords);
    } else if (u(rng) < cfg.lex_effect) {
      word = pick(class_words);
    } else {
      word = pick(topic_words);
    }
    if (!text.empty()) text += ' ';
    if (since_period == 0 && !word.empty()) word[0] = static_cast<char>(std::toupper(word[0]));
    text += word;
    ++since_period;
    if (u(rng) < 0.02) text += " " + kAnnotations[static_cast<std::size_t>(u(rng) * 3.999)];
    if (since_period >= 7 && u(rng) < 0.3) {
      text += '.';
      since_period = 0;
    } else if (u(rng) < 0.08) {
      text += ',';
    }
  }
  if (since_period > 0) text += '.';
  return text;
}

struct PlantedStats {
  double hr_baseline, hr_bpm, hr_amplitude;
  double sc_level, sc_slope, sc_wobble;
};

// Each planted statistic is population-distributed as
//   N(base, subject_sd^2 + recording_sd^2)
// and deceptive recordings are shifted by effect * population sd, so the
// per-statistic class separation is exactly the configured effect size.
PlantedStats draw_planted(int label, double effect, std::mt19937_64& subject_rng,
                          std::mt19937_64& rec_rng) {
  auto stat = [&](double base, double subj_sd, double rec_sd) {
    std::normal_distribution<double> subj(0.0, subj_sd);
    std::normal_distribution<double> rec(0.0, rec_sd);
    const double pop_sd = std::sqrt(subj_sd * subj_sd + rec_sd * rec_sd);
    return base + subj(subject_rng) + rec(rec_rng) +
           (label == 1 ? effect * pop_sd : 0.0);
  };
  PlantedStats p{};
  p.hr_baseline = stat(10.0, 0.5, 0.25);
  p.hr_bpm = stat(72.0, 6.0, 3.0);
  p.hr_amplitude = stat(1.0, 0.10, 0.05);
  p.sc_level = stat(5.0, 0.8, 0.4);
  p.sc_slope = stat(0.3, 0.15, 0.08);
  p.sc_wobble = stat(0.25, 0.08, 0.04);
  return p;
}

physio::StreamSet make_streams(const PlantedStats& p, const GeneratorConfig& cfg,
                               std::mt19937_64& rec_rng, std::mt19937_64& subject_rng) {
  const double rate = cfg.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * rate));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::normal_distribution<double> noise(0.0, 1.0);

  physio::StreamSet set;
  set.heart_rate = {physio::Sensor::heart_rate, rate, std::vector<double>(n)};
  set.skin_conductance = {physio::Sensor::skin_conductance, rate, std::vector<double>(n)};
  set.skin_temperature = {physio::Sensor::skin_temperature, rate, std::vector<double>(n)};
  set.respiration = {physio::Sensor::respiration, rate, std::vector<double>(n)};

  const double hr_phase = phase(rec_rng);
  const double hr_amp = std::max(0.2, p.hr_amplitude);
  const double hr_hz = std::max(40.0, p.hr_bpm) / 60.0;

  std::normal_distribution<double> subj_resp(0.0, 2.0);
  std::normal_distribution<double> subj_temp(0.0, 0.4);
  const double resp_bpm = 15.0 + subj_resp(subject_rng) + 0.5 * noise(rec_rng);
  const double resp_hz = std::max(6.0, resp_bpm) / 60.0;
  const double resp_phase = phase(rec_rng);
  const double temp_base = 33.5 + subj_temp(subject_rng) + 0.1 * noise(rec_rng);
  const double temp_drift = 0.05 * noise(rec_rng);
  const double sc_phase = phase(rec_rng);

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    set.heart_rate.samples[i] = p.hr_baseline +
                                hr_amp * std::sin(2.0 * M_PI * hr_hz * t + hr_phase) +
                                0.03 * hr_amp * noise(rec_rng);
    set.skin_conductance.samples[i] =
        p.sc_level + p.sc_slope * (t / 60.0) +
        p.sc_wobble * std::sin(2.0 * M_PI * 0.05 * t + sc_phase) + 0.03 * noise(rec_rng);
    set.skin_temperature.samples[i] =
        temp_base + temp_drift * (t / cfg.duration_s) + 0.01 * noise(rec_rng);
    set.respiration.samples[i] = 1.0 * std::sin(2.0 * M_PI * resp_hz * t + resp_phase) +
                                 0.02 * noise(rec_rng);
  }
  return set;
}

}  // namespace

Dataset generate_dataset(const GeneratorConfig& config, const std::string& out_dir) {
  if (config.n_subjects == 0) throw ConfigError("n_subjects must be positive");
  if (config.min_tokens == 0 || config.min_tokens > config.max_tokens)
    throw ConfigError("bad transcript token range");
  if (config.phys_effect < 0 || config.lex_effect < 0 || config.lex_effect > 1)
    throw ConfigError("effect sizes must be nonnegative (lexical at most 1)");

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "streams", ec);
  if (ec) throw IoError("cannot create dataset directory " + out_dir + ": " + ec.message());

  // 53/104 female at the default scale, rounded at other scales.
  const auto n_female = static_cast<std::size_t>(
      std::llround(static_cast<double>(config.n_subjects) * 53.0 / 104.0));

  Dataset dataset;
  dataset.root = out_dir;
  for (std::size_t subj = 0; subj < config.n_subjects; ++subj) {
    char subject_id[16];
    std::snprintf(subject_id, sizeof(subject_id), "s%03zu", subj + 1);
    const std::string gender = subj < n_female ? "female" : "male";
    for (Topic topic : {Topic::abortion, Topic::best_friend}) {
      for (int label : {0, 1}) {
        // Subject-level traits are re-derived per recording from a subject
        // stream so generation order never shifts the draws.
        auto subject_rng = make_engine(config.seed, subj * 97 + static_cast<std::size_t>(topic));
        auto rec_rng = make_engine(config.seed, 1000003ULL + subj * 4 +
                                                    static_cast<std::size_t>(topic) * 2 +
                                                    static_cast<std::size_t>(label));

        Sample sample;
        sample.subject_id = subject_id;
        sample.gender = gender;
        sample.topic = topic;
        sample.label = label;
        sample.sample_id = std::string(subject_id) + "_" + to_string(topic) + "_" +
                           (label == 0 ? "t" : "d");
        sample.transcript = make_transcript(topic, label, config, rec_rng);
        sample.stream_file = "streams/" + sample.sample_id + ".csv";

        const PlantedStats planted =
            draw_planted(label, config.phys_effect, subject_rng, rec_rng);
        const physio::StreamSet streams = make_streams(planted, config, rec_rng, subject_rng);
        physio::write_stream_csv((fs::path(out_dir) / sample.stream_file).string(), streams);

        dataset.samples.push_back(std::move(sample));
      }
    }
  }

  save_manifest(dataset, (fs::path(out_dir) / "manifest.tsv").string());
  {
    std::ostringstream out;
    for (const Sample& s : dataset.samples)
      out << s.sample_id << '\t' << escape_field(s.transcript) << '\n';
    write_text_file((fs::path(out_dir) / "transcripts.tsv").string(), out.str());
  }
  return dataset;
}

void save_manifest(const Dataset& dataset, const std::string& path) {
  std::ostringstream out;
  out << "sample_id\tsubject_id\tgender\ttopic\tlabel\ttranscript_file\tstream_file\n";
  for (const Sample& s : dataset.samples)
    out << s.sample_id << '\t' << s.subject_id << '\t' << s.gender << '\t' << to_string(s.topic)
        << '\t' << s.label << '\t' << "transcripts.tsv" << '\t' << s.stream_file << '\n';
  write_text_file(path, out.str());
}

Dataset load_dataset(const std::string& root) {
  const std::string manifest_path = (fs::path(root) / "manifest.tsv").string();
  const auto lines = read_lines(manifest_path);
  if (lines.empty() ||
      lines[0] != "sample_id\tsubject_id\tgender\ttopic\tlabel\ttranscript_file\tstream_file")
    throw DataError(manifest_path + ": missing or malformed manifest header");

  std::map<std::string, std::string> transcripts;
  for (const auto& line : read_lines((fs::path(root) / "transcripts.tsv").string())) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(root + "/transcripts.tsv: line without a tab separator");
    transcripts[line.substr(0, tab)] = unescape_field(line.substr(tab + 1));
  }

  Dataset dataset;
  dataset.root = root;
  std::set<std::string> seen_ids;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_on(lines[ln], '\t');
    if (fields.size() != 7)
      throw DataError(manifest_path + ":" + std::to_string(ln + 1) + ": expected 7 fields");
    Sample s;
    s.sample_id = fields[0];
    s.subject_id = fields[1];
    s.gender = fields[2];
    s.topic = topic_from_string(fields[3]);
    s.label = std::stoi(fields[4]);
    if (s.label != 0 && s.label != 1)
      throw DataError(manifest_path + ": sample " + s.sample_id + " has label " + fields[4]);
    s.stream_file = fields[6];
    if (!seen_ids.insert(s.sample_id).second)
      throw DataError(manifest_path + ": duplicated sample_id " + s.sample_id);
    auto it = transcripts.find(s.sample_id);
    if (it == transcripts.end())
      throw DataError(root + ": sample " + s.sample_id + " has no transcript");
    s.transcript = it->second;
    dataset.samples.push_back(std::move(s));
  }

  // Pairing: every (subject, topic) holds exactly one truthful and one
  // deceptive recording.
  std::map<std::pair<std::string, Topic>, std::array<int, 2>> pairing;
  for (const Sample& s : dataset.samples)
    ++pairing[{s.subject_id, s.topic}][static_cast<std::size_t>(s.label)];
  for (const auto& [key, counts] : pairing)
    if (counts[0] != 1 || counts[1] != 1)
      throw DataError("pairing violated for subject " + key.first + ", topic " +
                      to_string(key.second) + ": " + std::to_string(counts[0]) +
                      " truthful / " + std::to_string(counts[1]) + " deceptive");

  return dataset;
}

physio::StreamSet Dataset::load_streams(const Sample& sample) const {
  const auto path = fs::path(root) / sample.stream_file;
  if (!fs::exists(path)) throw IoError("missing stream file " + path.string());
  return physio::read_stream_csv(path.string());
}

std::vector<Sample> filter_topic(const Dataset& dataset, const std::string& topic) {
  if (topic == "both") return dataset.samples;
  const Topic t = topic_from_string(topic);
  std::vector<Sample> out;
  for (const Sample& s : dataset.samples)
    if (s.topic == t) out.push_back(s);
  return out;
}

}  // namespace bimodal::data

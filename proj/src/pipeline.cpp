#include "bimodal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bimodal/rng.hpp"
#include "bimodal/textio.hpp"

namespace fs = std::filesystem;

namespace bimodal::pipe {

// ---- split ------------------------------------------------------------------

std::vector<std::string> SplitIndex::train_ids() const {
  return {ordered_ids.begin(), ordered_ids.begin() + static_cast<std::ptrdiff_t>(train_count)};
}

std::vector<std::string> SplitIndex::test_ids() const {
  return {ordered_ids.begin() + static_cast<std::ptrdiff_t>(train_count), ordered_ids.end()};
}

void SplitIndex::save(const std::string& path) const {
  std::ostringstream out;
  out << "seed " << seed << '\n';
  out << "[train]\n";
  for (std::size_t i = 0; i < train_count; ++i) out << ordered_ids[i] << '\n';
  out << "[test]\n";
  for (std::size_t i = train_count; i < ordered_ids.size(); ++i) out << ordered_ids[i] << '\n';
  write_text_file(path, out.str());
}

SplitIndex SplitIndex::load(const std::string& path) {
  const auto lines = read_lines(path);
  SplitIndex idx;
  if (lines.empty() || lines[0].rfind("seed ", 0) != 0)
    throw IoError(path + ": expected 'seed <n>' on line 1");
  idx.seed = std::stoull(lines[0].substr(5));
  int section = 0;  // 0 none, 1 train, 2 test
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    if (lines[i] == "[train]") {
      section = 1;
    } else if (lines[i] == "[test]") {
      section = 2;
    } else if (section == 1) {
      idx.ordered_ids.push_back(lines[i]);
      ++idx.train_count;
    } else if (section == 2) {
      idx.ordered_ids.push_back(lines[i]);
    } else {
      throw IoError(path + ": sample id before any section header");
    }
  }
  return idx;
}

SplitIndex split(const std::vector<data::Sample>& samples, std::uint64_t seed) {
  if (samples.size() < 10)
    throw DataError("split needs at least 10 samples, got " + std::to_string(samples.size()));

  const std::size_t target_train =
      static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(samples.size())));

  // Strata in fixed (topic, label) order; samples keep dataset order inside.
  std::map<std::pair<std::string, int>, std::vector<std::string>> strata;
  for (const auto& s : samples)
    strata[{data::to_string(s.topic), s.label}].push_back(s.sample_id);

  auto rng = make_engine(seed);
  struct Part {
    std::vector<std::string> ids;
    std::size_t take = 0;
    double remainder = 0;
  };
  std::vector<Part> parts;
  std::size_t allocated = 0;
  for (auto& [key, ids] : strata) {
    Part p;
    p.ids = std::move(ids);
    seeded_shuffle(p.ids, rng);
    const double exact = 0.9 * static_cast<double>(p.ids.size());
    p.take = static_cast<std::size_t>(std::floor(exact));
    p.remainder = exact - static_cast<double>(p.take);
    allocated += p.take;
    parts.push_back(std::move(p));
  }
  // Largest remainder tops up to exactly floor(0.9 n); ties resolve in
  // stratum order.
  std::vector<std::size_t> order(parts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return parts[a].remainder > parts[b].remainder; });
  for (std::size_t i = 0; allocated < target_train && i < order.size(); ++i) {
    Part& p = parts[order[i]];
    if (p.take < p.ids.size()) {
      ++p.take;
      ++allocated;
    }
  }

  SplitIndex idx;
  idx.seed = seed;
  idx.train_count = target_train;
  for (const Part& p : parts)
    for (std::size_t i = 0; i < p.take; ++i) idx.ordered_ids.push_back(p.ids[i]);
  for (const Part& p : parts)
    for (std::size_t i = p.take; i < p.ids.size(); ++i) idx.ordered_ids.push_back(p.ids[i]);
  return idx;
}

// ---- preprocessing ------------------------------------------------------------

FeatureBundle preprocess(const data::Dataset& dataset, const std::vector<data::Sample>& train,
                         const std::vector<data::Sample>& test, const HyperParams& hyper,
                         std::uint64_t prep_seed, const std::string& embeddings_file) {
  FeatureBundle bundle;
  for (const auto& s : train) bundle.train_ids.push_back(s.sample_id);
  for (const auto& s : test) bundle.test_ids.push_back(s.sample_id);

  std::vector<const data::Sample*> all;
  for (const auto& s : train) all.push_back(&s);
  for (const auto& s : test) all.push_back(&s);
  for (const auto* s : all) {
    bundle.all_ids.push_back(s->sample_id);
    bundle.labels[s->sample_id] = s->label;
  }

  // Physiological track: 59 descriptors, PCA fitted on training rows only,
  // then per-dimension standardization (train statistics) for the optimizer.
  bundle.raw_features.reserve(all.size());
  for (const auto* s : all)
    bundle.raw_features.push_back(physio::extract_features(dataset.load_streams(*s)));

  std::vector<std::vector<double>> train_rows;
  train_rows.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    train_rows.emplace_back(bundle.raw_features[i].begin(), bundle.raw_features[i].end());
  bundle.pca = physio::pca_fit(train_rows, hyper.pca_dim);

  bundle.pca_rows.reserve(all.size());
  for (const auto& f : bundle.raw_features)
    bundle.pca_rows.push_back(physio::pca_transform(bundle.pca, f));

  // One global scale from the training rows. Per-dimension standardization
  // would make every position of the projection statistically identical and
  // starve the position-blind conv + max-pool stack of magnitude cues.
  double scale = 0;
  for (std::size_t i = 0; i < train.size(); ++i)
    for (double v : bundle.pca_rows[i]) scale += v * v;
  scale = std::sqrt(scale / static_cast<double>(train.size() * hyper.pca_dim));
  if (scale < 1e-12) scale = 1.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    nn::Tensor t({hyper.pca_dim});
    for (std::size_t j = 0; j < hyper.pca_dim; ++j) t[j] = bundle.pca_rows[i][j] / scale;
    bundle.phys_input.emplace(bundle.all_ids[i], std::move(t));
  }

  // Linguistic track: vocabulary from training transcripts, padded length
  // over train -and- test so cross-topic lookups cannot overflow.
  std::vector<std::vector<std::string>> train_tokens, all_tokens;
  for (const auto& s : train) train_tokens.push_back(ling::clean_transcript(s.transcript));
  all_tokens = train_tokens;
  for (const auto& s : test) all_tokens.push_back(ling::clean_transcript(s.transcript));

  bundle.vocab = ling::Vocabulary::build(train_tokens, hyper.vocab_cap);
  bundle.padded_len = ling::CorpusStats::compute(all_tokens).padded_len();

  if (embeddings_file.empty()) {
    ling::SkipgramOptions sg = hyper.skipgram;
    sg.seed = prep_seed;
    bundle.embeddings = ling::train_skipgram(train_tokens, bundle.vocab, sg).model;
  } else {
    bundle.embeddings = ling::load_embeddings(embeddings_file, bundle.vocab);
  }

  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto ids = ling::vectorize(all_tokens[i], bundle.vocab, bundle.padded_len);
    bundle.ling_input.emplace(bundle.all_ids[i],
                              ling::embed(ids, bundle.embeddings).array);
  }
  return bundle;
}

// ---- training ------------------------------------------------------------------

namespace {

const nn::Tensor& input_for(const FeatureBundle& features, nets::Modality modality,
                            const std::string& id) {
  const auto& table = modality == nets::Modality::linguistic ? features.ling_input
                                                             : features.phys_input;
  auto it = table.find(id);
  if (it == table.end())
    throw DataError("no " + nets::to_string(modality) + " features for sample " + id);
  return it->second;
}

std::vector<double> train_full_batch(nn::Network& net,
                                     const std::vector<const nn::Tensor*>& inputs,
                                     const std::vector<int>& labels, std::size_t epochs,
                                     double learning_rate) {
  if (inputs.size() != labels.size())
    throw DataError("training inputs and labels are misaligned");
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = learning_rate;
  nn::Adam adam(net.params(), adam_cfg);
  std::vector<double> curve;
  curve.reserve(epochs);
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    net.params().zero_grads();
    double total = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      nn::Tensor scores = net.forward(*inputs[i]);
      nn::LossGrad lg = nn::softmax_cross_entropy(scores, static_cast<std::size_t>(labels[i]));
      total += lg.loss;
      for (std::size_t c = 0; c < lg.grad.size(); ++c) lg.grad[c] *= inv_n;
      net.backward(lg.grad);
    }
    adam.step(net.params());
    curve.push_back(total * inv_n);
  }
  return curve;
}

}  // namespace

TrainedNet train_unimodal(nets::Modality modality, const FeatureBundle& features,
                          const HyperParams& hyper, std::uint64_t seed) {
  if (modality == nets::Modality::bimodal)
    throw ConfigError("train_unimodal expects a unimodal network");
  if (features.train_ids.empty()) throw DataError("no training samples");

  nets::NetworkSpec spec = modality == nets::Modality::linguistic
                               ? nets::default_ling_spec(features.padded_len,
                                                         hyper.filters_per_size)
                               : nets::default_phys_spec(hyper.filters_per_size);
  spec.input_cols = modality == nets::Modality::linguistic ? 32 : hyper.pca_dim;

  TrainedNet out;
  out.net = nets::make_network(spec, seed);

  std::vector<const nn::Tensor*> inputs;
  std::vector<int> labels;
  for (const auto& id : features.train_ids) {
    inputs.push_back(&input_for(features, modality, id));
    labels.push_back(features.labels.at(id));
  }
  const std::size_t epochs =
      modality == nets::Modality::linguistic ? hyper.ling_epochs : hyper.phys_epochs;
  out.loss_curve = train_full_batch(*out.net, inputs, labels, epochs, hyper.learning_rate);
  return out;
}

ScoreTable export_scores(nn::Network& net, nets::Modality modality,
                         const std::vector<std::string>& ids, const FeatureBundle& features) {
  ScoreTable table;
  table.ids = ids;
  table.scores.reserve(ids.size());
  for (const auto& id : ids) {
    const nn::Tensor scores = net.forward(input_for(features, modality, id));
    table.scores.push_back({scores[0], scores[1]});
  }
  return table;
}

TrainedNet train_bimodal(const ScoreTable& ling_train, const ScoreTable& phys_train,
                         const std::map<std::string, int>& labels, const HyperParams& hyper,
                         std::uint64_t seed) {
  if (ling_train.ids.size() != phys_train.ids.size())
    throw DataError("fusion inputs differ in sample count");
  for (std::size_t i = 0; i < ling_train.ids.size(); ++i)
    if (ling_train.ids[i] != phys_train.ids[i])
      throw DataError("fusion inputs misaligned at position " + std::to_string(i) + ": " +
                      ling_train.ids[i] + " vs " + phys_train.ids[i]);

  TrainedNet out;
  out.net = nets::make_network(nets::default_fusion_spec(), seed);

  std::vector<nn::Tensor> fused;
  fused.reserve(ling_train.ids.size());
  std::vector<const nn::Tensor*> inputs;
  std::vector<int> y;
  for (std::size_t i = 0; i < ling_train.ids.size(); ++i) {
    fused.push_back(nets::fuse_input(ling_train.scores[i], phys_train.scores[i]));
    y.push_back(labels.at(ling_train.ids[i]));
  }
  for (const auto& t : fused) inputs.push_back(&t);
  out.loss_curve =
      train_full_batch(*out.net, inputs, y, hyper.fusion_epochs, hyper.learning_rate);
  return out;
}

// ---- voting ---------------------------------------------------------------------

namespace {

void check_vote_matrix(const VoteMatrix& votes) {
  if (votes.rows.empty()) throw DataError("vote matrix has no runs");
  for (const auto& row : votes.rows) {
    if (row.size() != votes.test_ids.size())
      throw GeometryError("ragged vote matrix: row of width " + std::to_string(row.size()) +
                          ", expected " + std::to_string(votes.test_ids.size()));
    for (int v : row)
      if (v != 0 && v != 1) throw DataError("vote entries must be 0 or 1");
  }
}

}  // namespace

std::vector<int> majority_vote_prefix(const VoteMatrix& votes, std::size_t runs) {
  check_vote_matrix(votes);
  if (runs == 0 || runs > votes.rows.size())
    throw ConfigError("vote prefix length " + std::to_string(runs) + " out of range");
  std::vector<int> out(votes.test_ids.size());
  for (std::size_t col = 0; col < out.size(); ++col) {
    std::size_t ones = 0;
    for (std::size_t r = 0; r < runs; ++r) ones += static_cast<std::size_t>(votes.rows[r][col]);
    out[col] = 2 * ones >= runs ? 1 : 0;  // ties go to deceptive
  }
  return out;
}

std::vector<int> majority_vote(const VoteMatrix& votes) {
  return majority_vote_prefix(votes, votes.rows.size());
}

void VoteMatrix::save(const std::string& path) const {
  std::ostringstream out;
  out << "run_seed";
  for (const auto& id : test_ids) out << ',' << id;
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << run_seeds[r];
    for (int v : rows[r]) out << ',' << v;
    out << '\n';
  }
  write_text_file(path, out.str());
}

VoteMatrix VoteMatrix::load(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0].rfind("run_seed", 0) != 0)
    throw IoError(path + ": missing vote matrix header");
  VoteMatrix votes;
  {
    auto header = split_on(lines[0], ',');
    votes.test_ids.assign(header.begin() + 1, header.end());
  }
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_on(lines[ln], ',');
    if (fields.size() != votes.test_ids.size() + 1)
      throw IoError(path + ":" + std::to_string(ln + 1) + ": wrong column count");
    votes.run_seeds.push_back(std::stoull(fields[0]));
    std::vector<int> row;
    row.reserve(votes.test_ids.size());
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(std::stoi(fields[i]));
    votes.rows.push_back(std::move(row));
  }
  return votes;
}

// ---- metrics ---------------------------------------------------------------------

MetricsReport compute_metrics(const std::vector<int>& predictions,
                              const std::vector<int>& truth) {
  if (predictions.size() != truth.size())
    throw GeometryError("predictions and truth differ in length");
  if (predictions.empty()) throw GeometryError("cannot compute metrics on empty vectors");

  MetricsReport report;
  report.n = truth.size();
  std::size_t correct_deceptive = 0, correct_truthful = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++report.n_deceptive;
      if (predictions[i] == 1) ++correct_deceptive;
    } else {
      ++report.n_truthful;
      if (predictions[i] == 0) ++correct_truthful;
    }
  }
  report.correct = correct_deceptive + correct_truthful;
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.n);
  if (report.n_deceptive > 0)
    report.deceptive_recall =
        static_cast<double>(correct_deceptive) / static_cast<double>(report.n_deceptive);
  if (report.n_truthful > 0)
    report.truthful_recall =
        static_cast<double>(correct_truthful) / static_cast<double>(report.n_truthful);
  return report;
}

std::string MetricsReport::to_json_text() const {
  nlohmann::ordered_json j;
  j["experiment"] = {{"modality", modality},
                     {"train_topic", train_topic},
                     {"test_topic", test_topic},
                     {"runs", runs},
                     {"base_seed", base_seed},
                     {"aggregation", aggregation}};
  j["counts"] = {{"test_samples", n},
                 {"truthful", n_truthful},
                 {"deceptive", n_deceptive},
                 {"correct", correct}};
  j["overall_accuracy"] = accuracy;
  j["deceptive_recall"] =
      deceptive_recall ? nlohmann::ordered_json(*deceptive_recall) : nlohmann::ordered_json();
  j["truthful_recall"] =
      truthful_recall ? nlohmann::ordered_json(*truthful_recall) : nlohmann::ordered_json();
  return j.dump(2) + "\n";
}

void MetricsReport::save(const std::string& path) const { write_text_file(path, to_json_text()); }

MetricsReport MetricsReport::load(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  MetricsReport r;
  r.modality = j["experiment"]["modality"];
  r.train_topic = j["experiment"]["train_topic"];
  r.test_topic = j["experiment"]["test_topic"];
  r.runs = j["experiment"]["runs"];
  r.base_seed = j["experiment"]["base_seed"];
  r.aggregation = j["experiment"]["aggregation"];
  r.n = j["counts"]["test_samples"];
  r.n_truthful = j["counts"]["truthful"];
  r.n_deceptive = j["counts"]["deceptive"];
  r.correct = j["counts"]["correct"];
  r.accuracy = j["overall_accuracy"];
  if (!j["deceptive_recall"].is_null()) r.deceptive_recall = j["deceptive_recall"];
  if (!j["truthful_recall"].is_null()) r.truthful_recall = j["truthful_recall"];
  return r;
}

// ---- experiment -------------------------------------------------------------------

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  out << "train_topic=" << train_topic << '\n';
  out << "test_topic=" << test_topic << '\n';
  out << "runs=" << runs << '\n';
  out << "split_seed=" << split_seed << '\n';
  out << "prep_seed=" << prep_seed << '\n';
  out << "base_run_seed=" << base_run_seed << '\n';
  out << "want_ling=" << want_ling << '\n';
  out << "want_phys=" << want_phys << '\n';
  out << "want_bimodal=" << want_bimodal << '\n';
  out << "resplit_per_run=" << resplit_per_run << '\n';
  out << "parallel=" << parallel << '\n';
  out << "embeddings_file=" << embeddings_file << '\n';
  out << "filters_per_size=" << hyper.filters_per_size << '\n';
  out << "phys_epochs=" << hyper.phys_epochs << '\n';
  out << "ling_epochs=" << hyper.ling_epochs << '\n';
  out << "fusion_epochs=" << hyper.fusion_epochs << '\n';
  out << "learning_rate=" << fmt_g17(hyper.learning_rate) << '\n';
  out << "vocab_cap=" << hyper.vocab_cap << '\n';
  out << "pca_dim=" << hyper.pca_dim << '\n';
  out << "skipgram_window=" << hyper.skipgram.window << '\n';
  out << "skipgram_negatives=" << hyper.skipgram.negatives << '\n';
  out << "skipgram_epochs=" << hyper.skipgram.epochs << '\n';
  out << "skipgram_learning_rate=" << fmt_g17(hyper.skipgram.learning_rate) << '\n';
  return out.str();
}

namespace {

struct RunPredictions {
  std::vector<int> ling, phys, bimodal;
};

RunPredictions run_once(const FeatureBundle& bundle, const ExperimentConfig& cfg,
                        std::uint64_t run_seed) {
  const bool need_ling = cfg.want_ling || cfg.want_bimodal;
  const bool need_phys = cfg.want_phys || cfg.want_bimodal;

  RunPredictions preds;
  TrainedNet ling_net, phys_net;
  ScoreTable ling_train, ling_test, phys_train, phys_test;
  if (need_ling) {
    ling_net = train_unimodal(nets::Modality::linguistic, bundle, cfg.hyper,
                              mix_seed(run_seed, 0));
    ling_train = export_scores(*ling_net.net, nets::Modality::linguistic, bundle.train_ids, bundle);
    ling_test = export_scores(*ling_net.net, nets::Modality::linguistic, bundle.test_ids, bundle);
    if (cfg.want_ling)
      for (const auto& s : ling_test.scores) preds.ling.push_back(nets::predict(s));
  }
  if (need_phys) {
    phys_net = train_unimodal(nets::Modality::physiological, bundle, cfg.hyper,
                              mix_seed(run_seed, 1));
    phys_train = export_scores(*phys_net.net, nets::Modality::physiological, bundle.train_ids, bundle);
    phys_test = export_scores(*phys_net.net, nets::Modality::physiological, bundle.test_ids, bundle);
    if (cfg.want_phys)
      for (const auto& s : phys_test.scores) preds.phys.push_back(nets::predict(s));
  }
  if (cfg.want_bimodal) {
    TrainedNet fusion =
        train_bimodal(ling_train, phys_train, bundle.labels, cfg.hyper, mix_seed(run_seed, 2));
    for (std::size_t i = 0; i < bundle.test_ids.size(); ++i) {
      const nn::Tensor scores =
          fusion.net->forward(nets::fuse_input(ling_test.scores[i], phys_test.scores[i]));
      preds.bimodal.push_back(nets::predict(scores));
    }
  }
  return preds;
}

void for_each_run(std::size_t runs, std::size_t parallel,
                  const std::function<void(std::size_t)>& body) {
  if (parallel <= 1) {
    for (std::size_t r = 0; r < runs; ++r) body(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const std::size_t n_workers = std::min(parallel, runs);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&]() {
      for (;;) {
        const std::size_t r = next.fetch_add(1);
        if (r >= runs) return;
        try {
          body(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

void select_samples(const data::Dataset& dataset, const ExperimentConfig& cfg,
                    std::optional<SplitIndex>& split_out, std::vector<data::Sample>& train,
                    std::vector<data::Sample>& test, std::uint64_t split_seed) {
  std::map<std::string, data::Sample> by_id;
  for (const auto& s : dataset.samples) by_id[s.sample_id] = s;

  if (cfg.train_topic == cfg.test_topic) {
    const auto subset = data::filter_topic(dataset, cfg.train_topic);
    SplitIndex idx = split(subset, split_seed);
    for (const auto& id : idx.train_ids()) train.push_back(by_id.at(id));
    for (const auto& id : idx.test_ids()) test.push_back(by_id.at(id));
    split_out = std::move(idx);
  } else {
    train = data::filter_topic(dataset, cfg.train_topic);
    test = data::filter_topic(dataset, cfg.test_topic);
    split_out.reset();
  }
}

MetricsReport describe(MetricsReport metrics, const std::string& modality,
                       const ExperimentConfig& cfg, const char* aggregation) {
  metrics.modality = modality;
  metrics.train_topic = cfg.train_topic;
  metrics.test_topic = cfg.test_topic;
  metrics.runs = cfg.runs;
  metrics.base_seed = cfg.base_run_seed;
  metrics.aggregation = aggregation;
  return metrics;
}

}  // namespace

ExperimentResult run_experiment(const data::Dataset& dataset, const ExperimentConfig& config,
                                const std::string& out_dir) {
  if (config.runs == 0) throw ConfigError("run count must be positive");
  if (!config.want_ling && !config.want_phys && !config.want_bimodal)
    throw ConfigError("no modality requested");
  for (const auto& topic : {config.train_topic, config.test_topic})
    if (topic != "both" && topic != "abortion" && topic != "best_friend")
      throw ConfigError("unknown topic: " + topic);
  if ((config.train_topic == "both") != (config.test_topic == "both") &&
      (config.train_topic == "both" || config.test_topic == "both"))
    throw ConfigError("cross-topic runs need two concrete topics");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
  write_text_file((fs::path(out_dir) / "run_config.txt").string(), config.serialize());

  ExperimentResult result;

  if (!config.resplit_per_run) {
    std::vector<data::Sample> train, test;
    select_samples(dataset, config, result.split, train, test, config.split_seed);
    const FeatureBundle bundle = preprocess(dataset, train, test, config.hyper,
                                            config.prep_seed, config.embeddings_file);
    for (const auto& id : bundle.test_ids) result.test_labels.push_back(bundle.labels.at(id));

    auto init_votes = [&](const char* name) {
      VoteMatrix& v = result.votes[name];
      v.test_ids = bundle.test_ids;
      v.run_seeds.assign(config.runs, 0);
      v.rows.assign(config.runs, {});
    };
    if (config.want_ling) init_votes("linguistic");
    if (config.want_phys) init_votes("physiological");
    if (config.want_bimodal) init_votes("bimodal");

    for_each_run(config.runs, config.parallel, [&](std::size_t r) {
      const std::uint64_t run_seed = mix_seed(config.base_run_seed, r);
      RunPredictions preds = run_once(bundle, config, run_seed);
      if (config.want_ling) {
        result.votes["linguistic"].run_seeds[r] = run_seed;
        result.votes["linguistic"].rows[r] = std::move(preds.ling);
      }
      if (config.want_phys) {
        result.votes["physiological"].run_seeds[r] = run_seed;
        result.votes["physiological"].rows[r] = std::move(preds.phys);
      }
      if (config.want_bimodal) {
        result.votes["bimodal"].run_seeds[r] = run_seed;
        result.votes["bimodal"].rows[r] = std::move(preds.bimodal);
      }
    });

    for (auto& [modality, votes] : result.votes) {
      const std::vector<int> voted = majority_vote(votes);
      result.reports[modality] =
          describe(compute_metrics(voted, result.test_labels), modality, config, "majority_vote");
    }

    if (result.split) result.split->save((fs::path(out_dir) / "split.txt").string());
    physio::write_feature_csv((fs::path(out_dir) / "features59.csv").string(), bundle.all_ids,
                              bundle.raw_features);
    physio::write_pca_csv((fs::path(out_dir) / "pca32.csv").string(), bundle.all_ids,
                          bundle.pca_rows);
    physio::write_feature_manifest((fs::path(out_dir) / "physio_manifest.txt").string());
    bundle.vocab.save((fs::path(out_dir) / "vocab.tsv").string());
    ling::save_embeddings((fs::path(out_dir) / "embeddings.txt").string(), bundle.vocab,
                          bundle.embeddings);
  } else {
    // Ablation path: a fresh split (and fresh preprocessing) per run; metrics
    // are pooled over runs because vote columns would not line up.
    struct Pool {
      std::vector<int> preds, truth;
    };
    std::map<std::string, Pool> pools;
    for (std::size_t r = 0; r < config.runs; ++r) {
      std::optional<SplitIndex> split_idx;
      std::vector<data::Sample> train, test;
      select_samples(dataset, config, split_idx, train, test, mix_seed(config.split_seed, r));
      const FeatureBundle bundle = preprocess(dataset, train, test, config.hyper,
                                              mix_seed(config.prep_seed, r),
                                              config.embeddings_file);
      RunPredictions preds = run_once(bundle, config, mix_seed(config.base_run_seed, r));
      std::vector<int> truth;
      for (const auto& id : bundle.test_ids) truth.push_back(bundle.labels.at(id));
      auto pool = [&](const char* name, const std::vector<int>& p) {
        pools[name].preds.insert(pools[name].preds.end(), p.begin(), p.end());
        pools[name].truth.insert(pools[name].truth.end(), truth.begin(), truth.end());
      };
      if (config.want_ling) pool("linguistic", preds.ling);
      if (config.want_phys) pool("physiological", preds.phys);
      if (config.want_bimodal) pool("bimodal", preds.bimodal);
    }
    for (const auto& [modality, pool] : pools)
      result.reports[modality] = describe(compute_metrics(pool.preds, pool.truth), modality,
                                          config, "pooled_over_resplits");
  }

  for (const auto& [modality, votes] : result.votes)
    votes.save((fs::path(out_dir) / ("votes_" + modality + ".csv")).string());
  for (const auto& [modality, report] : result.reports)
    report.save((fs::path(out_dir) / ("report_" + modality + ".json")).string());
  return result;
}

// ---- stability -----------------------------------------------------------------

std::vector<StabilityRow> stability_analysis(const VoteMatrix& votes,
                                             const std::vector<int>& truth,
                                             const std::vector<std::size_t>& run_counts) {
  for (std::size_t i = 1; i < run_counts.size(); ++i)
    if (run_counts[i] <= run_counts[i - 1])
      throw ConfigError("run counts must be strictly ascending");
  if (!run_counts.empty() && run_counts.back() > votes.rows.size())
    throw ConfigError("run count " + std::to_string(run_counts.back()) +
                      " exceeds the vote matrix height " + std::to_string(votes.rows.size()));

  std::vector<StabilityRow> rows;
  for (std::size_t r : run_counts) {
    const MetricsReport m = compute_metrics(majority_vote_prefix(votes, r), truth);
    rows.push_back({r, m.accuracy, m.deceptive_recall, m.truthful_recall});
  }
  return rows;
}

void write_stability_csv(const std::string& path, const std::vector<StabilityRow>& rows) {
  std::ostringstream out;
  out << "R,overall,deceptive_recall,truthful_recall\n";
  for (const auto& row : rows) {
    out << row.runs << ',' << fmt_g17(row.overall) << ','
        << (row.deceptive_recall ? fmt_g17(*row.deceptive_recall) : "nan") << ','
        << (row.truthful_recall ? fmt_g17(*row.truthful_recall) : "nan") << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace bimodal::pipe

// Command-line front end for the bimodal deception-detection toolkit:
// synthetic data generation, preprocessing, embedding training, experiments,
// stability analysis and classical baselines. Every command takes its
// randomness from explicit seeds and serializes its configuration into the
// output directory, so reruns are byte-identical.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "bimodal/baselines.hpp"
#include "bimodal/data.hpp"
#include "bimodal/ling.hpp"
#include "bimodal/pipeline.hpp"
#include "bimodal/textio.hpp"

namespace fs = std::filesystem;
using namespace bimodal;

namespace {

void write_config_copy(const std::string& out_dir, const std::map<std::string, std::string>& kv) {
  std::ostringstream out;
  for (const auto& [key, value] : kv) out << key << '=' << value << '\n';
  write_text_file((fs::path(out_dir) / "run_config.txt").string(), out.str());
}

struct ExperimentFlags {
  std::string data_dir;
  std::string out_dir;
  std::string modality = "bimodal";
  std::string topic = "both";
  std::string train_topic, test_topic;
  pipe::ExperimentConfig config;

  void register_common(CLI::App* cmd, bool cross_topic) {
    cmd->add_option("--data", data_dir, "Dataset directory")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--modality", modality, "ling, phys, bimodal or all")
        ->check(CLI::IsMember({"ling", "phys", "bimodal", "all"}))
        ->capture_default_str();
    if (cross_topic) {
      cmd->add_option("--train-topic", train_topic, "Topic used for training")->required();
      cmd->add_option("--test-topic", test_topic, "Topic used for testing")->required();
    } else {
      cmd->add_option("--topic", topic, "abortion, best_friend or both")
          ->check(CLI::IsMember({"abortion", "best_friend", "both"}))
          ->capture_default_str();
      cmd->add_option("--train-topic", train_topic, "Cross-topic training topic");
      cmd->add_option("--test-topic", test_topic, "Cross-topic testing topic");
    }
    cmd->add_option("--runs", config.runs, "Voting runs R")->capture_default_str();
    cmd->add_option("--split-seed", config.split_seed, "Split shuffle seed")
        ->capture_default_str();
    cmd->add_option("--prep-seed", config.prep_seed, "Preprocessing seed")
        ->capture_default_str();
    cmd->add_option("--run-seed", config.base_run_seed, "Base seed for the voting runs")
        ->capture_default_str();
    cmd->add_option("--filters", config.hyper.filters_per_size, "Filters per size")
        ->capture_default_str();
    cmd->add_option("--epochs-ling", config.hyper.ling_epochs, "Linguistic epochs")
        ->capture_default_str();
    cmd->add_option("--epochs-phys", config.hyper.phys_epochs, "Physiological epochs")
        ->capture_default_str();
    cmd->add_option("--epochs-fusion", config.hyper.fusion_epochs, "Fusion epochs")
        ->capture_default_str();
    cmd->add_option("--lr", config.hyper.learning_rate, "Optimizer learning rate")
        ->capture_default_str();
    cmd->add_option("--vocab-cap", config.hyper.vocab_cap, "Vocabulary cap")
        ->capture_default_str();
    cmd->add_option("--pca-dim", config.hyper.pca_dim, "PCA output dimension")
        ->capture_default_str();
    cmd->add_option("--window", config.hyper.skipgram.window, "Skip-gram window")
        ->capture_default_str();
    cmd->add_option("--negatives", config.hyper.skipgram.negatives, "Negative samples")
        ->capture_default_str();
    cmd->add_option("--sg-epochs", config.hyper.skipgram.epochs, "Skip-gram epochs")
        ->capture_default_str();
    cmd->add_option("--sg-lr", config.hyper.skipgram.learning_rate, "Skip-gram learning rate")
        ->capture_default_str();
    cmd->add_option("--embed-file", config.embeddings_file,
                    "Pretrained embedding file (default: train on the training transcripts)");
    cmd->add_option("--parallel", config.parallel, "Concurrent voting runs")
        ->capture_default_str();
    cmd->add_flag("--resplit-per-run", config.resplit_per_run,
                  "Ablation: redraw the split every run and pool metrics");
  }

  pipe::ExperimentConfig finalize() {
    if (!train_topic.empty() || !test_topic.empty()) {
      if (train_topic.empty() || test_topic.empty())
        throw ConfigError("--train-topic and --test-topic must be given together");
      config.train_topic = train_topic;
      config.test_topic = test_topic;
    } else {
      config.train_topic = topic;
      config.test_topic = topic;
    }
    config.want_ling = modality == "ling" || modality == "all";
    config.want_phys = modality == "phys" || modality == "all";
    config.want_bimodal = modality == "bimodal" || modality == "all";
    return config;
  }
};

int run_gen_data(const data::GeneratorConfig& cfg, const std::string& out_dir) {
  const data::Dataset dataset = data::generate_dataset(cfg, out_dir);
  std::map<std::string, std::size_t> per_topic;
  for (const auto& s : dataset.samples) ++per_topic[data::to_string(s.topic)];
  std::printf("wrote %zu samples (%zu subjects) to %s\n", dataset.samples.size(),
              cfg.n_subjects, out_dir.c_str());
  for (const auto& [t, n] : per_topic) std::printf("  %s: %zu\n", t.c_str(), n);
  write_config_copy(out_dir,
                    {{"command", "gen-data"},
                     {"subjects", std::to_string(cfg.n_subjects)},
                     {"seed", std::to_string(cfg.seed)},
                     {"phys_effect", fmt_g17(cfg.phys_effect)},
                     {"lex_effect", fmt_g17(cfg.lex_effect)},
                     {"rate", fmt_g17(cfg.sample_rate_hz)},
                     {"duration", fmt_g17(cfg.duration_s)},
                     {"min_tokens", std::to_string(cfg.min_tokens)},
                     {"max_tokens", std::to_string(cfg.max_tokens)}});
  return 0;
}

int run_experiment_cmd(ExperimentFlags& flags) {
  const pipe::ExperimentConfig config = flags.finalize();
  const data::Dataset dataset = data::load_dataset(flags.data_dir);
  const pipe::ExperimentResult result = pipe::run_experiment(dataset, config, flags.out_dir);
  for (const auto& [modality, report] : result.reports) {
    std::printf("%s: accuracy %.4f", modality.c_str(), report.accuracy);
    if (report.deceptive_recall) std::printf(", deceptive recall %.4f", *report.deceptive_recall);
    if (report.truthful_recall) std::printf(", truthful recall %.4f", *report.truthful_recall);
    std::printf(" (%zu test samples, R=%zu)\n", report.n, config.runs);
  }
  return 0;
}

int run_stability_cmd(ExperimentFlags& flags, const std::string& run_counts_arg) {
  std::vector<std::size_t> run_counts;
  for (const auto& part : split_on(run_counts_arg, ','))
    run_counts.push_back(static_cast<std::size_t>(std::stoull(part)));
  if (run_counts.empty()) throw ConfigError("empty --run-counts");

  flags.config.runs = run_counts.back();
  const pipe::ExperimentConfig config = flags.finalize();
  const data::Dataset dataset = data::load_dataset(flags.data_dir);
  const pipe::ExperimentResult result = pipe::run_experiment(dataset, config, flags.out_dir);
  for (const auto& [modality, votes] : result.votes) {
    const auto rows = pipe::stability_analysis(votes, result.test_labels, run_counts);
    const std::string path =
        (fs::path(flags.out_dir) / ("stability_" + modality + ".csv")).string();
    pipe::write_stability_csv(path, rows);
    std::printf("%s: wrote %zu stability rows to %s\n", modality.c_str(), rows.size(),
                path.c_str());
  }
  return 0;
}

int run_baselines_cmd(const std::string& data_dir, const std::string& experiment_dir,
                      const std::string& out_dir, const baselines::BaselineOptions& options) {
  const data::Dataset dataset = data::load_dataset(data_dir);

  const std::string split_path = (fs::path(experiment_dir) / "split.txt").string();
  if (!fs::exists(split_path))
    throw ConfigError("no split.txt under " + experiment_dir +
                      " (run a within-topic experiment first)");
  const pipe::SplitIndex split = pipe::SplitIndex::load(split_path);
  const auto vocab = ling::Vocabulary::load((fs::path(experiment_dir) / "vocab.tsv").string());
  const auto pca = physio::read_pca_csv((fs::path(experiment_dir) / "pca32.csv").string());
  const auto bimodal_report =
      pipe::MetricsReport::load((fs::path(experiment_dir) / "report_bimodal.json").string());

  std::map<std::string, std::vector<double>> pca_by_id;
  for (std::size_t i = 0; i < pca.sample_ids.size(); ++i)
    pca_by_id[pca.sample_ids[i]] = pca.rows[i];
  std::map<std::string, data::Sample> by_id;
  for (const auto& s : dataset.samples) by_id[s.sample_id] = s;

  auto collect = [&](const std::vector<std::string>& ids) {
    std::vector<data::Sample> samples;
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError("split id " + id + " not in the dataset");
      samples.push_back(it->second);
    }
    return baselines::build_baseline_inputs(samples, vocab, pca_by_id);
  };
  const auto train = collect(split.train_ids());
  const auto test = collect(split.test_ids());

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  const auto rows = baselines::run_baseline_comparison(train, test, bimodal_report, options);
  baselines::write_comparison_csv((fs::path(out_dir) / "comparison.csv").string(), rows);
  for (const auto& row : rows)
    std::printf("%-20s accuracy %.4f\n", row.model.c_str(), row.report.accuracy);
  write_config_copy(out_dir, {{"command", "baselines"},
                              {"experiment_dir", experiment_dir},
                              {"tree_runs", std::to_string(options.tree_runs)},
                              {"tree_seed", std::to_string(options.tree_seed)},
                              {"svm_c", fmt_g17(options.svm_c)}});
  return 0;
}

int run_train_embeddings(const std::string& input, const std::string& out_dir, bool tsv,
                         std::size_t vocab_cap, const ling::SkipgramOptions& sg) {
  std::vector<std::vector<std::string>> corpus;
  if (tsv) {
    for (const auto& rec : ling::read_corpus_file(input))
      corpus.push_back(ling::clean_transcript(rec.text));
  } else {
    for (const auto& line : read_lines(input)) {
      auto tokens = ling::clean_transcript(line);
      if (!tokens.empty()) corpus.push_back(std::move(tokens));
    }
  }
  const auto vocab = ling::Vocabulary::build(corpus, vocab_cap);
  const auto result = ling::train_skipgram(corpus, vocab, sg);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  vocab.save((fs::path(out_dir) / "vocab.tsv").string());
  ling::save_embeddings((fs::path(out_dir) / "embeddings.txt").string(), vocab, result.model);
  std::printf("trained %zu-word embeddings in %zu epochs (final mean loss %.4f)\n",
              vocab.size(), sg.epochs, result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back());
  write_config_copy(out_dir, {{"command", "train-embeddings"},
                              {"input", input},
                              {"vocab_cap", std::to_string(vocab_cap)},
                              {"window", std::to_string(sg.window)},
                              {"negatives", std::to_string(sg.negatives)},
                              {"epochs", std::to_string(sg.epochs)},
                              {"lr", fmt_g17(sg.learning_rate)},
                              {"seed", std::to_string(sg.seed)}});
  return 0;
}

int run_preprocess(const std::string& data_dir, const std::string& out_dir,
                   const std::string& topic, std::uint64_t split_seed,
                   const pipe::HyperParams& hyper, std::uint64_t prep_seed,
                   const std::string& embed_file) {
  const data::Dataset dataset = data::load_dataset(data_dir);
  const auto subset = data::filter_topic(dataset, topic);
  const pipe::SplitIndex idx = pipe::split(subset, split_seed);

  std::map<std::string, data::Sample> by_id;
  for (const auto& s : dataset.samples) by_id[s.sample_id] = s;
  std::vector<data::Sample> train, test;
  for (const auto& id : idx.train_ids()) train.push_back(by_id.at(id));
  for (const auto& id : idx.test_ids()) test.push_back(by_id.at(id));

  const pipe::FeatureBundle bundle =
      pipe::preprocess(dataset, train, test, hyper, prep_seed, embed_file);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  idx.save((fs::path(out_dir) / "split.txt").string());
  physio::write_feature_csv((fs::path(out_dir) / "features59.csv").string(), bundle.all_ids,
                            bundle.raw_features);
  physio::write_pca_csv((fs::path(out_dir) / "pca32.csv").string(), bundle.all_ids,
                        bundle.pca_rows);
  physio::write_feature_manifest((fs::path(out_dir) / "physio_manifest.txt").string());
  bundle.vocab.save((fs::path(out_dir) / "vocab.tsv").string());
  ling::save_embeddings((fs::path(out_dir) / "embeddings.txt").string(), bundle.vocab,
                        bundle.embeddings);
  {
    std::vector<ling::CorpusRecord> records;
    for (const auto& id : bundle.all_ids) {
      const auto& s = by_id.at(id);
      records.push_back({s.sample_id, s.subject_id, data::to_string(s.topic), s.label,
                         s.transcript});
    }
    ling::write_corpus_file((fs::path(out_dir) / "corpus.tsv").string(), records);
  }
  std::printf("preprocessed %zu train + %zu test samples (padded length %zu)\n",
              bundle.train_ids.size(), bundle.test_ids.size(), bundle.padded_len);
  write_config_copy(out_dir, {{"command", "preprocess"},
                              {"topic", topic},
                              {"split_seed", std::to_string(split_seed)},
                              {"prep_seed", std::to_string(prep_seed)},
                              {"vocab_cap", std::to_string(hyper.vocab_cap)},
                              {"pca_dim", std::to_string(hyper.pca_dim)},
                              {"embed_file", embed_file}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bimodal (transcript + physiology) CNN deception-detection toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from a key=value file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  // gen-data
  data::GeneratorConfig gen_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--out", gen_out, "Dataset directory")->required();
  gen->add_option("--subjects", gen_cfg.n_subjects, "Number of subjects")->capture_default_str();
  gen->add_option("--seed", gen_cfg.seed, "Generator seed")->capture_default_str();
  gen->add_option("--phys-effect", gen_cfg.phys_effect,
                  "Planted physiological class shift (population-std units)")
      ->capture_default_str();
  gen->add_option("--lex-effect", gen_cfg.lex_effect,
                  "Probability mass of class-specific words")
      ->capture_default_str();
  gen->add_option("--rate", gen_cfg.sample_rate_hz, "Sensor sample rate (Hz)")
      ->capture_default_str();
  gen->add_option("--duration", gen_cfg.duration_s, "Recording length (s)")
      ->capture_default_str();
  gen->add_option("--min-tokens", gen_cfg.min_tokens, "Shortest transcript")
      ->capture_default_str();
  gen->add_option("--max-tokens", gen_cfg.max_tokens, "Longest transcript")
      ->capture_default_str();

  // preprocess
  std::string pre_data, pre_out, pre_topic = "both", pre_embed;
  std::uint64_t pre_split_seed = 1, pre_prep_seed = 2;
  pipe::HyperParams pre_hyper;
  auto* pre = app.add_subcommand("preprocess", "Extract features for a saved split");
  pre->add_option("--data", pre_data, "Dataset directory")->required();
  pre->add_option("--out", pre_out, "Output directory")->required();
  pre->add_option("--topic", pre_topic, "abortion, best_friend or both")
      ->check(CLI::IsMember({"abortion", "best_friend", "both"}))
      ->capture_default_str();
  pre->add_option("--split-seed", pre_split_seed, "Split shuffle seed")->capture_default_str();
  pre->add_option("--prep-seed", pre_prep_seed, "Preprocessing seed")->capture_default_str();
  pre->add_option("--vocab-cap", pre_hyper.vocab_cap, "Vocabulary cap")->capture_default_str();
  pre->add_option("--pca-dim", pre_hyper.pca_dim, "PCA output dimension")->capture_default_str();
  pre->add_option("--window", pre_hyper.skipgram.window, "Skip-gram window")
      ->capture_default_str();
  pre->add_option("--negatives", pre_hyper.skipgram.negatives, "Negative samples")
      ->capture_default_str();
  pre->add_option("--sg-epochs", pre_hyper.skipgram.epochs, "Skip-gram epochs")
      ->capture_default_str();
  pre->add_option("--sg-lr", pre_hyper.skipgram.learning_rate, "Skip-gram learning rate")
      ->capture_default_str();
  pre->add_option("--embed-file", pre_embed, "Pretrained embedding file");

  // train-embeddings
  std::string emb_input, emb_out;
  bool emb_tsv = false;
  std::size_t emb_vocab_cap = 500;
  ling::SkipgramOptions emb_sg;
  auto* emb = app.add_subcommand("train-embeddings", "Train skip-gram word vectors");
  emb->add_option("--input", emb_input, "Corpus file (plain text, one document per line)")
      ->required();
  emb->add_option("--out", emb_out, "Output directory")->required();
  emb->add_flag("--tsv", emb_tsv, "Input is the 5-column transcript corpus format");
  emb->add_option("--vocab-cap", emb_vocab_cap, "Vocabulary cap")->capture_default_str();
  emb->add_option("--window", emb_sg.window, "Window size")->capture_default_str();
  emb->add_option("--negatives", emb_sg.negatives, "Negative samples")->capture_default_str();
  emb->add_option("--sg-epochs", emb_sg.epochs, "Epochs")->capture_default_str();
  emb->add_option("--sg-lr", emb_sg.learning_rate, "Learning rate")->capture_default_str();
  emb->add_option("--seed", emb_sg.seed, "Init/negative-sampling seed")->capture_default_str();

  // experiment / cross / stability
  ExperimentFlags exp_flags;
  auto* exp = app.add_subcommand("experiment", "Train, vote and report one experiment");
  exp_flags.register_common(exp, /*cross_topic=*/false);

  ExperimentFlags cross_flags;
  auto* cross = app.add_subcommand("cross", "Cross-topic experiment (train on one topic, test on the other)");
  cross_flags.register_common(cross, /*cross_topic=*/true);

  ExperimentFlags stab_flags;
  std::string stab_counts = "50,100,200,500";
  auto* stab = app.add_subcommand("stability", "Voted metrics at increasing run counts");
  stab_flags.register_common(stab, /*cross_topic=*/false);
  stab->add_option("--run-counts", stab_counts, "Ascending run counts, comma separated")
      ->capture_default_str();

  // baselines
  std::string base_data, base_exp, base_out;
  baselines::BaselineOptions base_opts;
  auto* base = app.add_subcommand("baselines",
                                  "Decision tree / SVM / logistic regression comparison");
  base->add_option("--data", base_data, "Dataset directory")->required();
  base->add_option("--experiment-dir", base_exp,
                   "Within-topic experiment output holding split.txt, pca32.csv, vocab.tsv and "
                   "report_bimodal.json")
      ->required();
  base->add_option("--out", base_out, "Output directory")->required();
  base->add_option("--tree-runs", base_opts.tree_runs, "Voting runs for the tree")
      ->capture_default_str();
  base->add_option("--tree-seed", base_opts.tree_seed, "Tree tie-break seed")
      ->capture_default_str();
  base->add_option("--svm-c", base_opts.svm_c, "SVM C")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_cfg, gen_out);
    if (pre->parsed())
      return run_preprocess(pre_data, pre_out, pre_topic, pre_split_seed, pre_hyper,
                            pre_prep_seed, pre_embed);
    if (emb->parsed()) return run_train_embeddings(emb_input, emb_out, emb_tsv, emb_vocab_cap, emb_sg);
    if (exp->parsed()) return run_experiment_cmd(exp_flags);
    if (cross->parsed()) return run_experiment_cmd(cross_flags);
    if (stab->parsed()) return run_stability_cmd(stab_flags, stab_counts);
    if (base->parsed()) return run_baselines_cmd(base_data, base_exp, base_out, base_opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

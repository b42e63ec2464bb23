#include "bimodal/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bimodal/rng.hpp"
#include "bimodal/textio.hpp"

namespace bimodal::baselines {

BaselineInputs build_baseline_inputs(const std::vector<data::Sample>& samples,
                                     const ling::Vocabulary& vocab,
                                     const std::map<std::string, std::vector<double>>& pca_rows) {
  BaselineInputs inputs;
  for (const auto& s : samples) {
    auto it = pca_rows.find(s.sample_id);
    if (it == pca_rows.end())
      throw DataError("no physiological features for sample " + s.sample_id);
    std::vector<double> row(vocab.size(), 0.0);
    for (const auto& tok : ling::clean_transcript(s.transcript)) {
      const std::size_t id = vocab.id(tok);
      if (id != 0) row[id - 1] += 1.0;
    }
    row.insert(row.end(), it->second.begin(), it->second.end());
    inputs.ids.push_back(s.sample_id);
    inputs.x.push_back(std::move(row));
    inputs.y.push_back(s.label);
  }
  return inputs;
}

// ---- decision tree -------------------------------------------------------------

namespace {

double gini(const std::array<std::size_t, 2>& counts) {
  const double n = static_cast<double>(counts[0] + counts[1]);
  if (n == 0) return 0;
  const double p0 = static_cast<double>(counts[0]) / n;
  const double p1 = static_cast<double>(counts[1]) / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct SplitCandidate {
  int feature = -1;
  double threshold = 0;
  double gain = -1;
};

struct TreeBuilder {
  const std::vector<std::vector<double>>& x;
  const std::vector<int>& y;
  std::size_t max_depth;
  std::mt19937_64 rng;
  std::vector<int> feature_order;

  std::unique_ptr<TreeNode> build(std::vector<std::size_t> rows, std::size_t depth) {
    auto node = std::make_unique<TreeNode>();
    for (std::size_t r : rows) ++node->counts[static_cast<std::size_t>(y[r])];
    node->label = node->counts[1] >= node->counts[0] ? 1 : 0;

    const bool pure = node->counts[0] == 0 || node->counts[1] == 0;
    if (pure || (max_depth > 0 && depth >= max_depth)) return node;

    const SplitCandidate best = pick_split(rows);
    if (best.feature < 0) return node;  // no threshold separates anything

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows)
      (x[r][static_cast<std::size_t>(best.feature)] < best.threshold ? left_rows : right_rows)
          .push_back(r);
    node->feature = best.feature;
    node->threshold = best.threshold;
    node->left = build(std::move(left_rows), depth + 1);
    node->right = build(std::move(right_rows), depth + 1);
    return node;
  }

  SplitCandidate pick_split(const std::vector<std::size_t>& rows) {
    const double parent_impurity = node_impurity(rows);
    std::vector<SplitCandidate> ties;
    double best_gain = -1;
    std::vector<std::pair<double, int>> column(rows.size());

    for (int feature : feature_order) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        column[i] = {x[rows[i]][static_cast<std::size_t>(feature)], y[rows[i]]};
      std::sort(column.begin(), column.end());

      std::array<std::size_t, 2> left{0, 0};
      std::array<std::size_t, 2> right{0, 0};
      for (const auto& [value, label] : column) ++right[static_cast<std::size_t>(label)];
      const double n = static_cast<double>(rows.size());

      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        ++left[static_cast<std::size_t>(column[i].second)];
        --right[static_cast<std::size_t>(column[i].second)];
        if (column[i].first == column[i + 1].first) continue;  // no midpoint between equals
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double gain =
            parent_impurity - (nl / n) * gini(left) - (nr / n) * gini(right);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          ties.clear();
        }
        if (std::fabs(gain - best_gain) <= 1e-12) {
          SplitCandidate cand;
          cand.feature = feature;
          cand.threshold = 0.5 * (column[i].first + column[i + 1].first);
          cand.gain = gain;
          ties.push_back(cand);
        }
      }
    }
    if (ties.empty()) return {};
    if (ties.size() == 1) return ties[0];
    std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
    return ties[pick(rng)];
  }

  double node_impurity(const std::vector<std::size_t>& rows) const {
    std::array<std::size_t, 2> counts{0, 0};
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(y[r])];
    return gini(counts);
  }
};

}  // namespace

std::unique_ptr<TreeNode> fit_decision_tree(const std::vector<std::vector<double>>& x,
                                            const std::vector<int>& y,
                                            const TreeOptions& options) {
  if (x.empty() || x.size() != y.size())
    throw DataError("decision tree needs a nonempty, aligned training set");
  for (int label : y)
    if (label != 0 && label != 1) throw DataError("decision tree labels must be 0/1");

  TreeBuilder builder{x, y, options.max_depth, make_engine(options.seed), {}};
  builder.feature_order.resize(x[0].size());
  std::iota(builder.feature_order.begin(), builder.feature_order.end(), 0);
  seeded_shuffle(builder.feature_order, builder.rng);

  std::vector<std::size_t> rows(x.size());
  std::iota(rows.begin(), rows.end(), 0);
  return builder.build(std::move(rows), 0);
}

int tree_predict(const TreeNode& node, std::span<const double> x) {
  const TreeNode* cur = &node;
  while (!cur->is_leaf())
    cur = x[static_cast<std::size_t>(cur->feature)] < cur->threshold ? cur->left.get()
                                                                     : cur->right.get();
  return cur->label;
}

// ---- linear models -------------------------------------------------------------

double decision_value(const LinearModel& model, std::span<const double> x) {
  double acc = model.bias;
  for (std::size_t i = 0; i < model.weights.size(); ++i) acc += model.weights[i] * x[i];
  return acc;
}

int linear_predict(const LinearModel& model, std::span<const double> x) {
  return decision_value(model, x) >= 0 ? 1 : 0;
}

LinearModel fit_logistic_regression(const std::vector<std::vector<double>>& x,
                                    const std::vector<int>& y, double learning_rate,
                                    std::size_t epochs, double l2) {
  if (x.empty() || x.size() != y.size())
    throw DataError("logistic regression needs a nonempty, aligned training set");
  const std::size_t dim = x[0].size();
  LinearModel model;
  model.weights.assign(dim, 0.0);

  const double inv_n = 1.0 / static_cast<double>(x.size());
  std::vector<double> grad(dim);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-decision_value(model, x[i])));
      const double err = (p - static_cast<double>(y[i])) * inv_n;
      for (std::size_t j = 0; j < dim; ++j) grad[j] += err * x[i][j];
      grad_bias += err;
    }
    for (std::size_t j = 0; j < dim; ++j)
      model.weights[j] -= learning_rate * (grad[j] + l2 * model.weights[j]);
    model.bias -= learning_rate * grad_bias;
  }
  return model;
}

double svm_objective(const LinearModel& model, const std::vector<std::vector<double>>& x,
                     const std::vector<int>& y, double c) {
  double w2 = 0;
  for (double w : model.weights) w2 += w * w;
  double hinge = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double target = y[i] == 1 ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - target * decision_value(model, x[i]));
  }
  return 0.5 * w2 / (c * static_cast<double>(x.size())) + hinge / static_cast<double>(x.size());
}

LinearModel fit_linear_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           double c, std::size_t epochs, double learning_rate) {
  if (x.empty() || x.size() != y.size())
    throw DataError("svm needs a nonempty, aligned training set");
  if (c <= 0) throw ConfigError("svm C must be positive");
  const std::size_t dim = x[0].size();
  LinearModel model;
  model.weights.assign(dim, 0.0);

  const double n = static_cast<double>(x.size());
  const double lambda = 1.0 / (c * n);
  std::vector<double> grad(dim);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    // decaying step keeps the objective curve monotone on toy problems
    const double lr = learning_rate / (1.0 + 0.01 * static_cast<double>(epoch));
    for (std::size_t j = 0; j < dim; ++j) grad[j] = lambda * model.weights[j];
    double grad_bias = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double target = y[i] == 1 ? 1.0 : -1.0;
      if (target * decision_value(model, x[i]) < 1.0) {
        for (std::size_t j = 0; j < dim; ++j) grad[j] -= target * x[i][j] / n;
        grad_bias -= target / n;
      }
    }
    for (std::size_t j = 0; j < dim; ++j) model.weights[j] -= lr * grad[j];
    model.bias -= lr * grad_bias;
  }
  return model;
}

// ---- comparison -------------------------------------------------------------

std::vector<ComparisonRow> run_baseline_comparison(const BaselineInputs& train,
                                                   const BaselineInputs& test,
                                                   const pipe::MetricsReport& bimodal,
                                                   const BaselineOptions& options) {
  if (train.x.empty() || test.x.empty()) throw DataError("empty baseline split");

  // Standardize with training statistics; the tree is scale-free but the
  // linear models are not.
  const std::size_t dim = train.x[0].size();
  std::vector<double> mu(dim, 0.0), sigma(dim, 0.0);
  for (const auto& row : train.x)
    for (std::size_t j = 0; j < dim; ++j) mu[j] += row[j];
  for (double& m : mu) m /= static_cast<double>(train.x.size());
  for (const auto& row : train.x)
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = row[j] - mu[j];
      sigma[j] += d * d;
    }
  for (double& s : sigma) {
    s = std::sqrt(s / static_cast<double>(train.x.size()));
    if (s < 1e-12) s = 1.0;
  }
  auto standardize = [&](const std::vector<std::vector<double>>& rows) {
    std::vector<std::vector<double>> out = rows;
    for (auto& row : out)
      for (std::size_t j = 0; j < dim; ++j) row[j] = (row[j] - mu[j]) / sigma[j];
    return out;
  };
  const auto train_x = standardize(train.x);
  const auto test_x = standardize(test.x);

  std::vector<ComparisonRow> rows;

  {
    pipe::VoteMatrix votes;
    votes.test_ids = test.ids;
    for (std::size_t r = 0; r < options.tree_runs; ++r) {
      TreeOptions tree_opts;
      tree_opts.seed = mix_seed(options.tree_seed, r);
      const auto tree = fit_decision_tree(train_x, train.y, tree_opts);
      std::vector<int> preds;
      preds.reserve(test_x.size());
      for (const auto& x : test_x) preds.push_back(tree_predict(*tree, x));
      votes.run_seeds.push_back(tree_opts.seed);
      votes.rows.push_back(std::move(preds));
    }
    pipe::MetricsReport report = pipe::compute_metrics(pipe::majority_vote(votes), test.y);
    report.modality = "decision_tree";
    report.train_topic = bimodal.train_topic;
    report.test_topic = bimodal.test_topic;
    report.runs = options.tree_runs;
    report.base_seed = options.tree_seed;
    rows.push_back({"decision_tree", std::move(report)});
  }

  auto single_model = [&](const std::string& name, const LinearModel& model) {
    std::vector<int> preds;
    preds.reserve(test_x.size());
    for (const auto& x : test_x) preds.push_back(linear_predict(model, x));
    pipe::MetricsReport report = pipe::compute_metrics(preds, test.y);
    report.modality = name;
    report.train_topic = bimodal.train_topic;
    report.test_topic = bimodal.test_topic;
    report.runs = 1;
    report.aggregation = "single_fit";
    rows.push_back({name, std::move(report)});
  };
  single_model("svm", fit_linear_svm(train_x, train.y, options.svm_c, options.svm_epochs,
                                     options.svm_learning_rate));
  single_model("logistic_regression",
               fit_logistic_regression(train_x, train.y, options.logreg_learning_rate,
                                       options.logreg_epochs));

  rows.push_back({"bimodal_cnn", bimodal});
  return rows;
}

void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "model,overall,deceptive_recall,truthful_recall\n";
  for (const auto& row : rows) {
    out << row.model << ',' << fmt_g17(row.report.accuracy) << ','
        << (row.report.deceptive_recall ? fmt_g17(*row.report.deceptive_recall) : "nan") << ','
        << (row.report.truthful_recall ? fmt_g17(*row.report.truthful_recall) : "nan") << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace bimodal::baselines

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bimodal/data.hpp"
#include "bimodal/ling.hpp"
#include "bimodal/pipeline.hpp"

namespace bimodal::baselines {

// Unigram counts over the vocabulary concatenated with the PCA projection.
struct BaselineInputs {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

BaselineInputs build_baseline_inputs(const std::vector<data::Sample>& samples,
                                     const ling::Vocabulary& vocab,
                                     const std::map<std::string, std::vector<double>>& pca_rows);

// ---- decision tree ----------------------------------------------------------

struct TreeNode {
  // split
  int feature = -1;
  double threshold = 0;
  std::unique_ptr<TreeNode> left, right;  // left: x[feature] < threshold
  // leaf
  int label = -1;
  std::array<std::size_t, 2> counts{0, 0};

  bool is_leaf() const { return feature < 0; }
};

struct TreeOptions {
  std::uint64_t seed = 0;
  std::size_t max_depth = 0;  // 0 = unlimited
};

// CART with Gini impurity and midpoint thresholds. Ties among equal-gain
// splits break randomly under the run seed (the per-run randomness that makes
// repeated-run voting meaningful); zero-gain splits are taken while the node
// is impure so conflicting-free training data is always fit exactly.
std::unique_ptr<TreeNode> fit_decision_tree(const std::vector<std::vector<double>>& x,
                                            const std::vector<int>& y,
                                            const TreeOptions& options);
int tree_predict(const TreeNode& node, std::span<const double> x);

// ---- linear models ----------------------------------------------------------

struct LinearModel {
  std::vector<double> weights;
  double bias = 0;
};

double decision_value(const LinearModel& model, std::span<const double> x);
int linear_predict(const LinearModel& model, std::span<const double> x);

// Full-batch gradient descent on the mean logistic loss, zero initialization.
LinearModel fit_logistic_regression(const std::vector<std::vector<double>>& x,
                                    const std::vector<int>& y, double learning_rate = 0.1,
                                    std::size_t epochs = 500, double l2 = 0.0);

// Primal hinge loss + L2 subgradient descent; labels are remapped to -1/+1.
LinearModel fit_linear_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           double c = 1.0, std::size_t epochs = 500, double learning_rate = 0.05);

// Objective tracked by the SVM fit, exposed for convergence checks.
double svm_objective(const LinearModel& model, const std::vector<std::vector<double>>& x,
                     const std::vector<int>& y, double c);

// ---- comparison -------------------------------------------------------------

struct BaselineOptions {
  std::size_t tree_runs = 200;
  std::uint64_t tree_seed = 7;
  double svm_c = 1.0;
  std::size_t svm_epochs = 500;
  double svm_learning_rate = 0.05;
  double logreg_learning_rate = 0.1;
  std::size_t logreg_epochs = 500;
};

struct ComparisonRow {
  std::string model;
  pipe::MetricsReport report;
};

// Decision tree voted over tree_runs seeded fits; SVM and logistic regression
// run once. The bimodal row is copied from the network experiment's report so
// all four lines describe the same split and features.
std::vector<ComparisonRow> run_baseline_comparison(const BaselineInputs& train,
                                                   const BaselineInputs& test,
                                                   const pipe::MetricsReport& bimodal,
                                                   const BaselineOptions& options);

void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows);

}  // namespace bimodal::baselines

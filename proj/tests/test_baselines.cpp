#include <doctest.h>

#include <cmath>
#include <random>

#include "bimodal/baselines.hpp"
#include "bimodal/rng.hpp"

using namespace bimodal;
using baselines::TreeOptions;

namespace {

double tree_accuracy(const baselines::TreeNode& tree, const std::vector<std::vector<double>>& x,
                     const std::vector<int>& y) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (baselines::tree_predict(tree, x[i]) == y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(x.size());
}

// Exhaustive best-gain search over every feature and midpoint.
double brute_force_best_gain(const std::vector<std::vector<double>>& x,
                             const std::vector<int>& y) {
  auto gini_of = [](std::size_t c0, std::size_t c1) {
    const double n = static_cast<double>(c0 + c1);
    if (n == 0) return 0.0;
    const double p0 = static_cast<double>(c0) / n;
    const double p1 = static_cast<double>(c1) / n;
    return 1.0 - p0 * p0 - p1 * p1;
  };
  std::size_t base0 = 0, base1 = 0;
  for (int label : y) ++(label ? base1 : base0);
  const double parent = gini_of(base0, base1);
  const double n = static_cast<double>(y.size());

  double best = -1;
  for (std::size_t f = 0; f < x[0].size(); ++f) {
    std::vector<double> values;
    for (const auto& row : x) values.push_back(row[f]);
    std::sort(values.begin(), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      if (values[i] == values[i + 1]) continue;
      const double threshold = 0.5 * (values[i] + values[i + 1]);
      std::size_t l0 = 0, l1 = 0, r0 = 0, r1 = 0;
      for (std::size_t row = 0; row < x.size(); ++row) {
        const bool left = x[row][f] < threshold;
        if (y[row] == 0)
          ++(left ? l0 : r0);
        else
          ++(left ? l1 : r1);
      }
      const double nl = static_cast<double>(l0 + l1), nr = n - nl;
      best = std::max(best, parent - (nl / n) * gini_of(l0, l1) - (nr / n) * gini_of(r0, r1));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("decision tree fits XOR exactly with unlimited depth") {
  const std::vector<std::vector<double>> x{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const std::vector<int> y{0, 1, 1, 0};
  const auto tree = baselines::fit_decision_tree(x, y, TreeOptions{});
  CHECK(tree_accuracy(*tree, x, y) == 1.0);
}

TEST_CASE("single-class data yields a lone leaf") {
  const std::vector<std::vector<double>> x{{0.5, 1}, {2, 3}, {4, -1}};
  const std::vector<int> y{1, 1, 1};
  const auto tree = baselines::fit_decision_tree(x, y, TreeOptions{});
  CHECK(tree->is_leaf());
  CHECK(tree->label == 1);
  CHECK(tree->counts[1] == 3);
}

TEST_CASE("axis-separable data gives a depth-1 split near zero") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    x.push_back({label ? mag(rng) : -mag(rng), mag(rng)});
    y.push_back(label);
  }
  const auto tree = baselines::fit_decision_tree(x, y, TreeOptions{});
  REQUIRE(!tree->is_leaf());
  CHECK(tree->feature == 0);
  CHECK(std::fabs(tree->threshold) < 0.25);
  CHECK(tree->left->is_leaf());
  CHECK(tree->right->is_leaf());
  CHECK(tree_accuracy(*tree, x, y) == 1.0);

  // the chosen root gain agrees with a brute-force enumeration
  const double parent_gini = 0.5;
  std::size_t left_n = 0;
  for (const auto& row : x)
    if (row[0] < tree->threshold) ++left_n;
  CHECK(left_n == 20);
  CHECK(brute_force_best_gain(x, y) == doctest::Approx(parent_gini).epsilon(1e-12));
}

TEST_CASE("greedy gain matches brute force on small random sets") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> val(-1, 1);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + static_cast<std::size_t>(trial) * 2;  // up to 48
    std::vector<std::vector<double>> x(n, std::vector<double>(3));
    std::vector<int> y(n);
    for (auto& row : x)
      for (auto& v : row) v = val(rng);
    bool two_classes = false;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = bit(rng);
      two_classes |= y[i] != y[0];
    }
    if (!two_classes) y[0] = 1 - y[0];

    const auto tree = baselines::fit_decision_tree(x, y, TreeOptions{});
    REQUIRE(!tree->is_leaf());
    // recompute the achieved root gain and compare to the exhaustive best
    std::size_t l0 = 0, l1 = 0, r0 = 0, r1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool left = x[i][static_cast<std::size_t>(tree->feature)] < tree->threshold;
      if (y[i] == 0)
        ++(left ? l0 : r0);
      else
        ++(left ? l1 : r1);
    }
    auto gini_of = [](std::size_t c0, std::size_t c1) {
      const double m = static_cast<double>(c0 + c1);
      if (m == 0) return 0.0;
      const double p0 = static_cast<double>(c0) / m, p1 = static_cast<double>(c1) / m;
      return 1.0 - p0 * p0 - p1 * p1;
    };
    std::size_t base0 = 0, base1 = 0;
    for (int label : y) ++(label ? base1 : base0);
    const double nl = static_cast<double>(l0 + l1);
    const double achieved = gini_of(base0, base1) -
                            (nl / static_cast<double>(n)) * gini_of(l0, l1) -
                            ((static_cast<double>(n) - nl) / static_cast<double>(n)) * gini_of(r0, r1);
    CHECK(achieved == doctest::Approx(brute_force_best_gain(x, y)).epsilon(1e-10).scale(1));
  }
}

TEST_CASE("tree training-set consistency on conflict-free data") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> val(-1, 1);
  std::uniform_int_distribution<int> bit(0, 1);
  std::vector<std::vector<double>> x(60, std::vector<double>(4));
  std::vector<int> y(60);
  for (auto& row : x)
    for (auto& v : row) v = val(rng);  // continuous draws: no duplicate rows
  for (auto& label : y) label = bit(rng);
  const auto tree = baselines::fit_decision_tree(x, y, TreeOptions{});
  CHECK(tree_accuracy(*tree, x, y) == 1.0);

  CHECK_THROWS_AS(baselines::fit_decision_tree({}, {}, TreeOptions{}), DataError);
}

TEST_CASE("logistic regression on trivial geometries") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (double v : {-1.0, -0.8, -0.6, 0.6, 0.8, 1.0}) {
    x.push_back({v});
    y.push_back(v > 0 ? 1 : 0);
  }
  const auto model = baselines::fit_logistic_regression(x, y, 0.5, 800);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(baselines::linear_predict(model, x[i]) == y[i]);

  const std::vector<int> zeros(x.size(), 0);
  const auto negative = baselines::fit_logistic_regression(x, zeros, 0.5, 800);
  for (const auto& row : x) CHECK(baselines::decision_value(negative, row) < 0);
}

TEST_CASE("logistic gradient at the regularized optimum is tiny") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0, 1);
  std::vector<std::vector<double>> x(40, std::vector<double>(3));
  std::vector<int> y(40);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (auto& v : x[i]) v = gauss(rng);
    y[i] = x[i][0] + 0.3 * gauss(rng) > 0 ? 1 : 0;
  }
  const double l2 = 0.1;
  const auto model = baselines::fit_logistic_regression(x, y, 0.5, 4000, l2);

  // analytic gradient of mean loss + (l2/2)||w||^2 at the fitted weights
  std::vector<double> grad(3, 0.0);
  double grad_bias = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-baselines::decision_value(model, x[i])));
    const double err = (p - y[i]) / static_cast<double>(x.size());
    for (std::size_t j = 0; j < 3; ++j) grad[j] += err * x[i][j];
    grad_bias += err;
  }
  double norm = grad_bias * grad_bias;
  for (std::size_t j = 0; j < 3; ++j) {
    grad[j] += l2 * model.weights[j];
    norm += grad[j] * grad[j];
  }
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("linear svm separates and respects symmetry") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (double v : {-1.0, -0.7, 0.7, 1.0}) {
    x.push_back({v});
    y.push_back(v > 0 ? 1 : 0);
  }
  const auto model = baselines::fit_linear_svm(x, y, 1.0, 600, 0.1);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(baselines::linear_predict(model, x[i]) == y[i]);
  CHECK(model.weights[0] > 0);  // margin sign

  const std::vector<std::vector<double>> sym{{-1.0}, {1.0}};
  const std::vector<int> sym_y{0, 1};
  const auto symmetric = baselines::fit_linear_svm(sym, sym_y, 1.0, 600, 0.1);
  CHECK(std::fabs(symmetric.bias) < 1e-3);
}

TEST_CASE("svm objective is non-increasing on a fixed toy problem") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0, 1);
  std::vector<std::vector<double>> x(30, std::vector<double>(2));
  std::vector<int> y(30);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = {gauss(rng), gauss(rng)};
    y[i] = x[i][0] > 0 ? 1 : 0;
  }
  double previous = baselines::svm_objective(baselines::LinearModel{{0, 0}, 0}, x, y, 1.0);
  for (std::size_t epochs : {5u, 10u, 20u, 40u, 80u, 160u}) {
    const auto model = baselines::fit_linear_svm(x, y, 1.0, epochs, 0.05);
    const double objective = baselines::svm_objective(model, x, y, 1.0);
    CHECK(objective <= previous + 1e-12);
    previous = objective;
  }
}

TEST_CASE("linear fits are deterministic") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> gauss(0, 1);
  std::vector<std::vector<double>> x(20, std::vector<double>(3));
  std::vector<int> y(20);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (auto& v : x[i]) v = gauss(rng);
    y[i] = static_cast<int>(i % 2);
  }
  const auto a = baselines::fit_logistic_regression(x, y);
  const auto b = baselines::fit_logistic_regression(x, y);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
  const auto c = baselines::fit_linear_svm(x, y);
  const auto d = baselines::fit_linear_svm(x, y);
  CHECK(c.weights == d.weights);
  CHECK(c.bias == d.bias);
}

TEST_CASE("comparison table covers the four models and beats chance on planted data") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0, 1);
  auto make_inputs = [&](std::size_t n, const char* prefix) {
    baselines::BaselineInputs inputs;
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % 2);
      std::vector<double> row(12);
      for (auto& v : row) v = gauss(rng);
      row[2] += 2.5 * label;  // planted signal
      inputs.ids.push_back(std::string(prefix) + std::to_string(i));
      inputs.x.push_back(std::move(row));
      inputs.y.push_back(label);
    }
    return inputs;
  };
  const auto train = make_inputs(60, "tr");
  const auto test = make_inputs(30, "te");

  pipe::MetricsReport bimodal;
  bimodal.modality = "bimodal";
  bimodal.accuracy = 0.9;
  bimodal.n = 30;

  baselines::BaselineOptions options;
  options.tree_runs = 25;
  const auto rows = baselines::run_baseline_comparison(train, test, bimodal, options);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].model == "decision_tree");
  CHECK(rows[1].model == "svm");
  CHECK(rows[2].model == "logistic_regression");
  CHECK(rows[3].model == "bimodal_cnn");
  for (std::size_t i = 0; i < 3; ++i) CHECK(rows[i].report.accuracy > 0.5);
  CHECK(rows[3].report.accuracy == 0.9);
}

TEST_CASE("tree voting with deterministic runs equals a single fit") {
  // a clean one-feature split leaves no gain ties, so every seeded run
  // produces the same tree and the vote is the single-run answer
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    x.push_back({i < 10 ? -1.0 - i * 0.01 : 1.0 + i * 0.01});
    y.push_back(i < 10 ? 0 : 1);
  }
  const auto reference = baselines::fit_decision_tree(x, y, TreeOptions{.seed = 0});
  for (std::uint64_t seed = 1; seed < 10; ++seed) {
    const auto tree = baselines::fit_decision_tree(x, y, TreeOptions{.seed = seed});
    for (const auto& row : x)
      CHECK(baselines::tree_predict(*tree, row) == baselines::tree_predict(*reference, row));
  }
}

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "bimodal/physio.hpp"
#include "bimodal/rng.hpp"

using namespace bimodal;
using physio::SensorStream;
using physio::StreamSet;

namespace {

StreamSet constant_streams(double value, double rate = 32, double seconds = 10) {
  const auto n = static_cast<std::size_t>(rate * seconds);
  StreamSet set;
  set.heart_rate = {physio::Sensor::heart_rate, rate, std::vector<double>(n, value)};
  set.skin_conductance = {physio::Sensor::skin_conductance, rate, std::vector<double>(n, value)};
  set.skin_temperature = {physio::Sensor::skin_temperature, rate, std::vector<double>(n, value)};
  set.respiration = {physio::Sensor::respiration, rate, std::vector<double>(n, value)};
  return set;
}

std::size_t manifest_index(const std::string& name) {
  for (const auto& def : physio::feature_manifest())
    if (def.name == name) return def.index;
  FAIL("unknown feature name ", name);
  return 0;
}

}  // namespace

TEST_CASE("descriptor set on trivial signals") {
  const std::vector<double> constant(64, 5.0);
  const auto d = physio::descriptor_set(constant, 8);
  CHECK(d.max == 5);
  CHECK(d.min == 5);
  CHECK(d.mean == 5);
  CHECK(d.rms == doctest::Approx(5).epsilon(1e-15));
  CHECK(d.std_dev == 0);
  CHECK(d.epoch_amplitude == 0);

  const std::vector<double> pair{-1.0, 1.0};
  const auto p = physio::descriptor_set(pair, 2);
  CHECK(p.max == 1);
  CHECK(p.min == -1);
  CHECK(p.mean == 0);
  CHECK(p.rms == doctest::Approx(1).epsilon(1e-15));
  CHECK(p.std_dev == doctest::Approx(1).epsilon(1e-15));

  CHECK_THROWS_AS(physio::descriptor_set(std::vector<double>{}, 4), DataError);
}

TEST_CASE("descriptor set matches a single-pass reference on random data") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> val(60, 100);
  std::vector<double> signal(1000);
  for (auto& v : signal) v = val(rng);
  const std::size_t epoch_len = 32;

  // single-pass reference
  double mx = signal[0], mn = signal[0], sum = 0, sum_sq = 0;
  for (double v : signal) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
    sum += v;
    sum_sq += v * v;
  }
  const double n = 1000.0;
  const double mean = sum / n;
  const double rms = std::sqrt(sum_sq / n);
  const double sd = std::sqrt(sum_sq / n - mean * mean);
  double amp_sum = 0;
  std::size_t epochs = 0;
  for (std::size_t b = 0; b + epoch_len / 2 <= signal.size(); b += epoch_len) {
    const std::size_t e = std::min(signal.size(), b + epoch_len);
    if (e - b < epoch_len && 2 * (e - b) < epoch_len) break;
    double lo = signal[b], hi = signal[b];
    for (std::size_t i = b; i < e; ++i) {
      lo = std::min(lo, signal[i]);
      hi = std::max(hi, signal[i]);
    }
    amp_sum += hi - lo;
    ++epochs;
  }

  const auto d = physio::descriptor_set(signal, epoch_len);
  CHECK(d.max == mx);
  CHECK(d.min == mn);
  CHECK(d.mean == doctest::Approx(mean).epsilon(1e-10));
  CHECK(d.rms == doctest::Approx(rms).epsilon(1e-10));
  CHECK(d.std_dev == doctest::Approx(sd).epsilon(1e-8));
  CHECK(d.epoch_amplitude == doctest::Approx(amp_sum / static_cast<double>(epochs)).epsilon(1e-10));
}

TEST_CASE("feature manifest covers 59 unique slots with the stated block sizes") {
  const auto& manifest = physio::feature_manifest();
  REQUIRE(manifest.size() == 59);
  std::set<std::string> names;
  std::size_t hr = 0, sc = 0, st = 0, resp = 0, combo = 0;
  for (const auto& def : manifest) {
    CHECK(names.insert(def.name).second);
    CHECK(def.index == &def - manifest.data());
    CHECK(!def.formula.empty());
    if (def.name.rfind("hr_", 0) == 0) ++hr;
    else if (def.name.rfind("sc_", 0) == 0) ++sc;
    else if (def.name.rfind("st_", 0) == 0) ++st;
    else if (def.name.rfind("resp_", 0) == 0) ++resp;
    else if (def.name.rfind("combo_", 0) == 0) ++combo;
  }
  CHECK(hr == 40);
  CHECK(sc == 5);
  CHECK(st == 5);
  CHECK(resp == 7);
  CHECK(combo == 2);
}

TEST_CASE("constant streams zero out spread statistics") {
  const auto features = physio::extract_features(constant_streams(5.0));
  CHECK(features[manifest_index("hr_raw_max")] == 5);
  CHECK(features[manifest_index("hr_raw_min")] == 5);
  CHECK(features[manifest_index("hr_raw_mean")] == 5);
  CHECK(features[manifest_index("hr_raw_rms")] == doctest::Approx(5).epsilon(1e-15));
  CHECK(features[manifest_index("hr_raw_std")] == 0);
  CHECK(features[manifest_index("hr_raw_epoch_amp")] == 0);
  CHECK(features[manifest_index("sc_std")] == 0);
  CHECK(features[manifest_index("st_std")] == 0);
  CHECK(features[manifest_index("resp_std")] == 0);
  CHECK(features[manifest_index("resp_bpm")] == 0);
  CHECK(features[manifest_index("combo_hr_range")] == 0);
  CHECK(features[manifest_index("combo_breath_heart_ratio")] == 0);
  for (double v : features) CHECK(std::isfinite(v));
}

TEST_CASE("extraction is deterministic for duplicated samples") {
  auto rng = make_engine(8);
  std::normal_distribution<double> noise(0, 1);
  StreamSet set = constant_streams(1.0, 32, 20);
  for (auto* stream : {&set.heart_rate, &set.skin_conductance, &set.skin_temperature,
                       &set.respiration})
    for (auto& v : stream->samples) v += 0.1 * noise(rng);
  const auto a = physio::extract_features(set);
  const auto b = physio::extract_features(set);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("missing stream errors name the sensor") {
  StreamSet set = constant_streams(1.0);
  set.skin_temperature.samples.clear();
  CHECK_THROWS_WITH_AS(physio::extract_features(set),
                       doctest::Contains("skin_temperature"), DataError);
}

TEST_CASE("planted sinusoid rate is recovered within 2 percent") {
  const double rate = 64, seconds = 30, hz = 1.2;  // 72 bpm
  const auto n = static_cast<std::size_t>(rate * seconds);
  StreamSet set = constant_streams(0.0, rate, seconds);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    set.heart_rate.samples[i] = 10.0 + std::sin(2 * M_PI * hz * t);
    set.respiration.samples[i] = std::sin(2 * M_PI * 0.25 * t);
  }
  const auto features = physio::extract_features(set);
  CHECK(features[manifest_index("hr_rate_mean")] == doctest::Approx(72.0).epsilon(0.02));
  CHECK(features[manifest_index("resp_bpm")] == doctest::Approx(15.0).epsilon(0.10));
}

TEST_CASE("positive scaling multiplies the raw descriptor slots exactly") {
  auto rng = make_engine(17);
  std::normal_distribution<double> noise(0, 1);
  StreamSet set = constant_streams(0.0, 32, 15);
  const auto n = set.heart_rate.samples.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 32.0;
    set.heart_rate.samples[i] = 8 + std::sin(2 * M_PI * 1.1 * t) + 0.05 * noise(rng);
    set.skin_conductance.samples[i] = 5 + 0.3 * noise(rng);
    set.skin_temperature.samples[i] = 33 + 0.05 * noise(rng);
    set.respiration.samples[i] = std::sin(2 * M_PI * 0.25 * t) + 0.02 * noise(rng);
  }
  const auto base = physio::extract_features(set);

  StreamSet scaled = set;
  const double c = 2.0;  // powers of two scale exactly in floating point
  for (auto* stream : {&scaled.heart_rate, &scaled.skin_conductance, &scaled.skin_temperature,
                       &scaled.respiration})
    for (auto& v : stream->samples) v *= c;
  const auto up = physio::extract_features(scaled);

  for (const char* name : {"hr_raw_max", "hr_raw_min", "hr_raw_mean", "hr_raw_rms",
                           "hr_raw_std", "hr_raw_epoch_amp", "sc_max", "sc_min", "sc_mean",
                           "sc_rms", "sc_std", "st_max", "st_min", "st_mean", "st_rms",
                           "st_std", "resp_max", "resp_min", "resp_mean", "resp_rms",
                           "resp_std", "resp_epoch_amp", "combo_hr_range"}) {
    const std::size_t i = manifest_index(name);
    CHECK(up[i] == c * base[i]);
  }
  // peak positions are scale invariant, so beat-derived slots do not move
  CHECK(up[manifest_index("hr_rate_mean")] == base[manifest_index("hr_rate_mean")]);
  CHECK(up[manifest_index("resp_bpm")] == base[manifest_index("resp_bpm")]);
}

TEST_CASE("pca on rank-1 two-dimensional data") {
  std::vector<std::vector<double>> rows;
  for (double v : {-2.0, -1.0, 0.0, 1.0, 2.0}) rows.push_back({v, v});
  const auto model = physio::pca_fit(rows, 2);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::fabs(model.components[0][0]) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(std::fabs(model.components[0][1]) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(model.components[0][0] * model.components[0][1] > 0);  // same sign along y=x
  CHECK(model.explained_variance[1] == doctest::Approx(0).epsilon(1e-12).scale(1));
}

TEST_CASE("pca matches the dense eigensolver oracle") {
  std::mt19937_64 rng(2025);
  std::normal_distribution<double> gauss(0, 1);
  const std::size_t dim = 59, k = 32;

  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 50 + static_cast<std::size_t>(trial) * 7;
    std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
    for (auto& r : rows)
      for (auto& v : r) v = gauss(rng);
    const auto model = physio::pca_fit(rows, k);

    // oracle: full eigendecomposition of the same covariance
    Eigen::MatrixXd x(n, dim);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dim; ++j) x(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    REQUIRE(solver.info() == Eigen::Success);

    for (std::size_t comp = 0; comp < k; ++comp) {
      // Eigen sorts ascending
      const auto col = solver.eigenvectors().col(static_cast<int>(dim - 1 - comp));
      CHECK(model.explained_variance[comp] ==
            doctest::Approx(solver.eigenvalues()(static_cast<int>(dim - 1 - comp)))
                .epsilon(1e-8)
                .scale(1));
      double dot = 0;
      for (std::size_t j = 0; j < dim; ++j) dot += model.components[comp][j] * col(static_cast<int>(j));
      const double sign = dot >= 0 ? 1.0 : -1.0;
      for (std::size_t j = 0; j < dim; ++j)
        CHECK(model.components[comp][j] ==
              doctest::Approx(sign * col(static_cast<int>(j))).epsilon(1e-8).scale(1));
    }

    // orthonormality and variance ordering
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a; b < k; ++b) {
        double dot = 0;
        for (std::size_t j = 0; j < dim; ++j) dot += model.components[a][j] * model.components[b][j];
        CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-10).scale(1));
      }
      if (a > 0) CHECK(model.explained_variance[a] <= model.explained_variance[a - 1]);
    }

    // eigenvalue sum (full decomposition) accounts for the total variance
    std::vector<double> values, vectors;
    {
      std::vector<double> cov_flat(dim * dim);
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
          cov_flat[i * dim + j] = cov(static_cast<int>(i), static_cast<int>(j));
      physio::jacobi_eigen_symmetric(cov_flat, dim, values, vectors);
    }
    double eig_sum = 0, trace = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      eig_sum += values[i];
      trace += cov(static_cast<int>(i), static_cast<int>(i));
    }
    CHECK(eig_sum == doctest::Approx(trace).epsilon(1e-8).scale(1));
  }
}

TEST_CASE("pca projections and reconstruction match the oracle optimum") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0, 1);
  const std::size_t n = 40, dim = 12, k = 5;
  std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
  for (auto& r : rows)
    for (auto& v : r) v = gauss(rng);
  const auto model = physio::pca_fit(rows, k);

  // x = mean -> zero projection
  const auto at_mean = physio::pca_transform(model, model.mean);
  for (double v : at_mean) CHECK(v == doctest::Approx(0).epsilon(1e-10).scale(1));

  // linearity of the centered map
  std::vector<double> a(dim), b(dim), ab(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    a[j] = gauss(rng);
    b[j] = gauss(rng);
    ab[j] = a[j] + b[j] - model.mean[j];
  }
  const auto ta = physio::pca_transform(model, a);
  const auto tb = physio::pca_transform(model, b);
  const auto tab = physio::pca_transform(model, ab);
  for (std::size_t i = 0; i < k; ++i)
    CHECK(tab[i] == doctest::Approx(ta[i] + tb[i]).epsilon(1e-10).scale(1));

  // reconstruction error no worse than the optimal rank-k error
  double ours = 0;
  for (const auto& row : rows) {
    const auto proj = physio::pca_transform(model, row);
    for (std::size_t j = 0; j < dim; ++j) {
      double rec = model.mean[j];
      for (std::size_t i = 0; i < k; ++i) rec += proj[i] * model.components[i][j];
      ours += (row[j] - rec) * (row[j] - rec);
    }
  }
  Eigen::MatrixXd x(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) x(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      centered.transpose() * centered / static_cast<double>(n - 1));
  const Eigen::MatrixXd basis = solver.eigenvectors().rightCols(static_cast<int>(k));
  const Eigen::MatrixXd residual = centered - centered * basis * basis.transpose();
  CHECK(ours == doctest::Approx(residual.squaredNorm()).epsilon(1e-8).scale(1));

  CHECK_THROWS_AS(physio::pca_transform(model, std::vector<double>(dim + 1, 0.0)),
                  GeometryError);
}

TEST_CASE("pca degenerate inputs") {
  std::vector<std::vector<double>> identical(8, std::vector<double>{1, 2, 3});
  const auto model = physio::pca_fit(identical, 2);
  for (double v : model.explained_variance) CHECK(v == 0);

  CHECK_THROWS_AS(physio::pca_fit({{1.0, 2.0}}, 1), DataError);

  // fitting twice gives identical models (seed-free determinism)
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0, 1);
  std::vector<std::vector<double>> rows(20, std::vector<double>(6));
  for (auto& r : rows)
    for (auto& v : r) v = gauss(rng);
  const auto m1 = physio::pca_fit(rows, 3);
  const auto m2 = physio::pca_fit(rows, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(m1.components[i][j] == m2.components[i][j]);
}

TEST_CASE("stream csv round-trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "bimodal_physio_test";
  fs::create_directories(dir);
  const std::string path = (dir / "stream.csv").string();

  StreamSet set = constant_streams(0.0, 16, 4);
  auto rng = make_engine(3);
  std::normal_distribution<double> gauss(0, 1);
  for (auto* s : {&set.heart_rate, &set.skin_conductance, &set.skin_temperature,
                  &set.respiration})
    for (auto& v : s->samples) v = gauss(rng);
  physio::write_stream_csv(path, set);
  const StreamSet loaded = physio::read_stream_csv(path);
  CHECK(loaded.heart_rate.sample_rate == 16);
  REQUIRE(loaded.heart_rate.samples.size() == set.heart_rate.samples.size());
  for (std::size_t i = 0; i < loaded.respiration.samples.size(); ++i)
    CHECK(loaded.respiration.samples[i] ==
          doctest::Approx(set.respiration.samples[i]).epsilon(1e-6).scale(1));
  fs::remove_all(dir);
}

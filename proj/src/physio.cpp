#include "bimodal/physio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bimodal/textio.hpp"

namespace bimodal::physio {

std::string to_string(Sensor s) {
  switch (s) {
    case Sensor::heart_rate: return "heart_rate";
    case Sensor::skin_conductance: return "skin_conductance";
    case Sensor::skin_temperature: return "skin_temperature";
    case Sensor::respiration: return "respiration";
  }
  throw ConfigError("unhandled sensor");
}

namespace {

// [begin, end) epoch windows; a trailing partial epoch qualifies when it is
// at least half an epoch long.
std::vector<std::pair<std::size_t, std::size_t>> epoch_spans(std::size_t n,
                                                             std::size_t epoch_len) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t begin = 0;
  while (begin + epoch_len <= n) {
    spans.emplace_back(begin, begin + epoch_len);
    begin += epoch_len;
  }
  const std::size_t tail = n - begin;
  if (tail > 0 && 2 * tail >= epoch_len) spans.emplace_back(begin, n);
  return spans;
}

double series_mean(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

// Elements per second, so the epoch rule carries over to derived series that
// live on a beat or epoch grid rather than the sample grid.
std::size_t epoch_len_for(std::size_t series_len, double duration_s) {
  if (duration_s <= 0) return std::max<std::size_t>(series_len, 1);
  const double per_second = static_cast<double>(series_len) / duration_s;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(per_second)));
}

// Derived series are empty for e.g. constant streams (no peaks); every
// descriptor of an empty series is defined as zero.
Descriptors descriptors_or_zero(const std::vector<double>& series, double duration_s) {
  if (series.empty()) return Descriptors{};
  return descriptor_set(series, epoch_len_for(series.size(), duration_s));
}

std::vector<double> first_difference(std::span<const double> x) {
  std::vector<double> d;
  if (x.size() < 2) return d;
  d.reserve(x.size() - 1);
  for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
  return d;
}

std::vector<double> box_smooth(std::span<const double> x, std::size_t window) {
  if (window <= 1) return std::vector<double>(x.begin(), x.end());
  std::vector<double> out(x.size());
  const std::size_t half = window / 2;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size(), i + half + 1);
    double s = 0;
    for (std::size_t j = lo; j < hi; ++j) s += x[j];
    out[i] = s / static_cast<double>(hi - lo);
  }
  return out;
}

void require_stream(const SensorStream& s, Sensor kind) {
  if (s.samples.empty())
    throw DataError("missing sensor stream: " + to_string(kind));
  if (s.sample_rate <= 0)
    throw DataError("sensor stream " + to_string(kind) + " has no sample rate");
}

void append_block(FeatureVector& out, std::size_t& slot, const Descriptors& d,
                  std::size_t count = 6) {
  const auto a = d.as_array();
  for (std::size_t i = 0; i < count; ++i) out[slot++] = a[i];
}

}  // namespace

Descriptors descriptor_set(std::span<const double> signal, std::size_t epoch_len) {
  if (signal.empty()) throw DataError("descriptor_set on empty signal");
  if (epoch_len == 0) throw ConfigError("epoch length must be positive");

  Descriptors d;
  d.max = signal[0];
  d.min = signal[0];
  double sum = 0, sum_sq = 0;
  for (double v : signal) {
    d.max = std::max(d.max, v);
    d.min = std::min(d.min, v);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(signal.size());
  d.mean = sum / n;
  d.rms = std::sqrt(sum_sq / n);
  double var = 0;
  for (double v : signal) var += (v - d.mean) * (v - d.mean);
  d.std_dev = std::sqrt(var / n);

  const auto spans = epoch_spans(signal.size(), epoch_len);
  if (!spans.empty()) {
    double amp_sum = 0;
    for (const auto& [b, e] : spans) {
      double lo = signal[b], hi = signal[b];
      for (std::size_t i = b + 1; i < e; ++i) {
        lo = std::min(lo, signal[i]);
        hi = std::max(hi, signal[i]);
      }
      amp_sum += hi - lo;
    }
    d.epoch_amplitude = amp_sum / static_cast<double>(spans.size());
  }
  return d;
}

std::vector<std::size_t> detect_peaks(std::span<const double> samples, double sample_rate,
                                      double refractory_s) {
  std::vector<std::size_t> peaks;
  if (samples.size() < 3) return peaks;
  const double mean = series_mean(samples);
  const auto refractory =
      static_cast<std::size_t>(std::llround(refractory_s * sample_rate));
  std::size_t last_accepted = 0;
  bool have_peak = false;
  for (std::size_t i = 1; i + 1 < samples.size(); ++i) {
    if (samples[i] <= mean) continue;
    if (!(samples[i] > samples[i - 1] && samples[i] > samples[i + 1])) continue;
    if (have_peak && i - last_accepted < refractory) continue;
    peaks.push_back(i);
    last_accepted = i;
    have_peak = true;
  }
  return peaks;
}

const std::vector<FeatureDef>& feature_manifest() {
  static const std::vector<FeatureDef> manifest = [] {
    std::vector<FeatureDef> defs;
    const char* stat_names[6] = {"max", "min", "mean", "rms", "std", "epoch_amp"};
    const char* stat_formulas[6] = {
        "max(x)", "min(x)", "mean(x)", "sqrt(mean(x^2))", "population std(x)",
        "mean over 1s epochs of (epoch max - epoch min)"};
    auto block = [&](const std::string& prefix, const std::string& series,
                     std::size_t count) {
      for (std::size_t i = 0; i < count; ++i)
        defs.push_back({defs.size(), prefix + "_" + stat_names[i],
                        std::string(stat_formulas[i]) + " over " + series});
    };
    // 40 heart-rate slots: six descriptor sets over derived series plus the
    // non-mean stats of the per-epoch amplitude series (its mean is already
    // hr_raw_epoch_amp).
    block("hr_raw", "raw heart-rate stream", 6);
    block("hr_diff", "first difference of the heart-rate stream", 6);
    block("hr_ibi", "inter-peak intervals (s), peaks above mean with 0.25 s refractory", 6);
    block("hr_ibi_diff", "successive differences of inter-peak intervals", 6);
    block("hr_rate", "instantaneous rate 60/ibi (bpm)", 6);
    block("hr_epoch_rate", "per-1s-epoch peak count scaled to bpm", 6);
    {
      const char* amp_stats[4] = {"max", "min", "rms", "std"};
      for (const char* s : amp_stats)
        defs.push_back({defs.size(), std::string("hr_epoch_amp_") + s,
                        std::string(s) + " over the per-epoch (max - min) amplitude series"});
    }
    block("sc", "skin conductance stream", 5);
    block("st", "skin temperature stream", 5);
    block("resp", "respiration stream", 6);
    defs.push_back({defs.size(), "resp_bpm",
                    "peaks of 1s box-smoothed respiration (1.0 s refractory) per minute"});
    defs.push_back({defs.size(), "combo_breath_heart_ratio",
                    "mean(instantaneous heart rate bpm) / resp_bpm, 0 when undefined"});
    defs.push_back({defs.size(), "combo_hr_range", "max(heart_rate) - min(heart_rate)"});
    if (defs.size() != kFeatureCount) throw StateError("feature manifest is not 59 slots");
    return defs;
  }();
  return manifest;
}

void write_feature_manifest(const std::string& path) {
  std::ostringstream out;
  out << "# physiological feature manifest v1\n";
  out << "# index\tname\tformula\n";
  for (const auto& def : feature_manifest())
    out << def.index << '\t' << def.name << '\t' << def.formula << '\n';
  write_text_file(path, out.str());
}

FeatureVector extract_features(const StreamSet& streams) {
  require_stream(streams.heart_rate, Sensor::heart_rate);
  require_stream(streams.skin_conductance, Sensor::skin_conductance);
  require_stream(streams.skin_temperature, Sensor::skin_temperature);
  require_stream(streams.respiration, Sensor::respiration);

  const SensorStream& hr = streams.heart_rate;
  const double duration = hr.duration_s();
  const std::size_t hr_epoch = epoch_len_for(hr.samples.size(), duration);

  FeatureVector out{};
  std::size_t slot = 0;

  const Descriptors raw = descriptor_set(hr.samples, hr_epoch);
  append_block(out, slot, raw);
  append_block(out, slot, descriptors_or_zero(first_difference(hr.samples), duration));

  const auto peaks = detect_peaks(hr.samples, hr.sample_rate);
  std::vector<double> ibi;
  for (std::size_t i = 1; i < peaks.size(); ++i)
    ibi.push_back(static_cast<double>(peaks[i] - peaks[i - 1]) / hr.sample_rate);
  std::vector<double> rate;
  for (double v : ibi)
    if (v > 0) rate.push_back(60.0 / v);

  append_block(out, slot, descriptors_or_zero(ibi, duration));
  append_block(out, slot, descriptors_or_zero(first_difference(ibi), duration));
  append_block(out, slot, descriptors_or_zero(rate, duration));

  const auto spans = epoch_spans(hr.samples.size(), hr_epoch);
  std::vector<double> epoch_rate, epoch_amp;
  for (const auto& [b, e] : spans) {
    std::size_t count = 0;
    for (std::size_t p : peaks)
      if (p >= b && p < e) ++count;
    const double span_s = static_cast<double>(e - b) / hr.sample_rate;
    epoch_rate.push_back(span_s > 0 ? 60.0 * static_cast<double>(count) / span_s : 0.0);
    double lo = hr.samples[b], hi = hr.samples[b];
    for (std::size_t i = b + 1; i < e; ++i) {
      lo = std::min(lo, hr.samples[i]);
      hi = std::max(hi, hr.samples[i]);
    }
    epoch_amp.push_back(hi - lo);
  }
  append_block(out, slot, descriptors_or_zero(epoch_rate, duration));
  {
    const Descriptors amp = descriptors_or_zero(epoch_amp, duration);
    out[slot++] = amp.max;
    out[slot++] = amp.min;
    out[slot++] = amp.rms;
    out[slot++] = amp.std_dev;
  }

  const SensorStream& sc = streams.skin_conductance;
  append_block(out, slot, descriptor_set(sc.samples, epoch_len_for(sc.samples.size(), sc.duration_s())), 5);
  const SensorStream& st = streams.skin_temperature;
  append_block(out, slot, descriptor_set(st.samples, epoch_len_for(st.samples.size(), st.duration_s())), 5);

  const SensorStream& resp = streams.respiration;
  append_block(out, slot, descriptor_set(resp.samples, epoch_len_for(resp.samples.size(), resp.duration_s())), 6);
  const auto smooth_window =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(resp.sample_rate)));
  const auto breath_peaks =
      detect_peaks(box_smooth(resp.samples, smooth_window), resp.sample_rate, 1.0);
  const double resp_minutes = resp.duration_s() / 60.0;
  const double resp_bpm =
      resp_minutes > 0 ? static_cast<double>(breath_peaks.size()) / resp_minutes : 0.0;
  out[slot++] = resp_bpm;

  const double hr_bpm_mean = series_mean(rate);
  out[slot++] = resp_bpm > 0 ? hr_bpm_mean / resp_bpm : 0.0;
  out[slot++] = raw.max - raw.min;

  if (slot != kFeatureCount) throw StateError("feature extraction filled the wrong slot count");
  return out;
}

// ---- PCA --------------------------------------------------------------------

void jacobi_eigen_symmetric(std::vector<double> a, std::size_t d, std::vector<double>& values,
                            std::vector<double>& vectors) {
  if (a.size() != d * d) throw GeometryError("jacobi input is not d x d");
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  double norm = 0;
  for (double x : a) norm += x * x;
  norm = std::sqrt(norm);
  const double tol = norm > 0 ? 1e-14 * norm : 0.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
    if (std::sqrt(off) <= tol) break;

    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::fabs(apq) <= tol / static_cast<double>(d * d)) continue;
        const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        double t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a[p * d + p] -= t * apq;
        a[q * d + q] += t * apq;
        a[p * d + q] = 0.0;
        a[q * d + p] = 0.0;
        for (std::size_t r = 0; r < d; ++r) {
          if (r == p || r == q) continue;
          const double arp = a[r * d + p];
          const double arq = a[r * d + q];
          a[r * d + p] = arp - s * (arq + tau * arp);
          a[p * d + r] = a[r * d + p];
          a[r * d + q] = arq + s * (arp - tau * arq);
          a[q * d + r] = a[r * d + q];
        }
        for (std::size_t r = 0; r < d; ++r) {
          const double vrp = v[r * d + p];
          const double vrq = v[r * d + q];
          v[r * d + p] = vrp - s * (vrq + tau * vrp);
          v[r * d + q] = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a[x * d + x] > a[y * d + y];
  });

  values.assign(d, 0.0);
  vectors.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    values[i] = a[order[i] * d + order[i]];
    for (std::size_t r = 0; r < d; ++r) vectors[i * d + r] = v[r * d + order[i]];
  }
}

PcaModel pca_fit(const std::vector<std::vector<double>>& rows, std::size_t k) {
  if (rows.size() < 2)
    throw DataError("pca_fit needs at least 2 rows, got " + std::to_string(rows.size()));
  const std::size_t dim = rows[0].size();
  if (k > dim)
    throw ConfigError("pca target dimension " + std::to_string(k) + " exceeds input dimension " +
                      std::to_string(dim));
  for (const auto& r : rows)
    if (r.size() != dim) throw GeometryError("pca rows have mixed lengths");

  PcaModel model;
  model.mean.assign(dim, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < dim; ++j) model.mean[j] += r[j];
  for (double& m : model.mean) m /= static_cast<double>(rows.size());

  std::vector<double> cov(dim * dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double xi = r[i] - model.mean[i];
      for (std::size_t j = i; j < dim; ++j) cov[i * dim + j] += xi * (r[j] - model.mean[j]);
    }
  }
  const double denom = static_cast<double>(rows.size() - 1);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i; j < dim; ++j) {
      cov[i * dim + j] /= denom;
      cov[j * dim + i] = cov[i * dim + j];
    }

  std::vector<double> values, vectors;
  jacobi_eigen_symmetric(std::move(cov), dim, values, vectors);

  model.components.resize(k);
  model.explained_variance.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    model.explained_variance[i] = std::max(0.0, values[i]);
    model.components[i].assign(vectors.begin() + static_cast<std::ptrdiff_t>(i * dim),
                               vectors.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    // Sign convention: the largest-magnitude entry points up.
    std::size_t arg = 0;
    for (std::size_t j = 1; j < dim; ++j)
      if (std::fabs(model.components[i][j]) > std::fabs(model.components[i][arg])) arg = j;
    if (model.components[i][arg] < 0)
      for (double& x : model.components[i]) x = -x;
  }
  return model;
}

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim())
    throw GeometryError("pca_transform input length " + std::to_string(x.size()) +
                        " != model dimension " + std::to_string(model.input_dim()));
  std::vector<double> out(model.output_dim(), 0.0);
  for (std::size_t i = 0; i < model.output_dim(); ++i) {
    double acc = 0;
    const auto& c = model.components[i];
    for (std::size_t j = 0; j < c.size(); ++j) acc += c[j] * (x[j] - model.mean[j]);
    out[i] = acc;
  }
  return out;
}

// ---- stream files -----------------------------------------------------------

StreamSet read_stream_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.size() < 3) throw IoError("stream file too short: " + path);
  double rate = 0;
  if (std::sscanf(lines[0].c_str(), "# sample_rate_hz=%lf", &rate) != 1 || rate <= 0)
    throw IoError(path + ":1: expected '# sample_rate_hz=<r>'");
  if (lines[1] != "time_s,heart_rate,skin_conductance,skin_temperature,respiration")
    throw IoError(path + ":2: unexpected stream header");

  StreamSet set;
  set.heart_rate = {Sensor::heart_rate, rate, {}};
  set.skin_conductance = {Sensor::skin_conductance, rate, {}};
  set.skin_temperature = {Sensor::skin_temperature, rate, {}};
  set.respiration = {Sensor::respiration, rate, {}};
  for (std::size_t ln = 2; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    double t, hr, sc, st, resp;
    if (std::sscanf(lines[ln].c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &hr, &sc, &st, &resp) != 5)
      throw IoError(path + ":" + std::to_string(ln + 1) + ": malformed stream row");
    set.heart_rate.samples.push_back(hr);
    set.skin_conductance.samples.push_back(sc);
    set.skin_temperature.samples.push_back(st);
    set.respiration.samples.push_back(resp);
  }
  return set;
}

void write_stream_csv(const std::string& path, const StreamSet& streams) {
  const std::size_t n = streams.heart_rate.samples.size();
  if (streams.skin_conductance.samples.size() != n ||
      streams.skin_temperature.samples.size() != n || streams.respiration.samples.size() != n)
    throw GeometryError("stream channels differ in length");
  std::string out;
  out.reserve(n * 48 + 128);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "# sample_rate_hz=%.17g\n", streams.heart_rate.sample_rate);
  out += buf;
  out += "time_s,heart_rate,skin_conductance,skin_temperature,respiration\n";
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  static_cast<double>(i) / streams.heart_rate.sample_rate,
                  streams.heart_rate.samples[i], streams.skin_conductance.samples[i],
                  streams.skin_temperature.samples[i], streams.respiration.samples[i]);
    out += buf;
  }
  write_text_file(path, out);
}

void write_feature_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                       const std::vector<FeatureVector>& rows) {
  if (sample_ids.size() != rows.size()) throw GeometryError("feature csv id/row mismatch");
  std::ostringstream out;
  out << "sample_id";
  for (const auto& def : feature_manifest()) out << ',' << def.name;
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << sample_ids[i];
    for (double v : rows[i]) out << ',' << fmt_g17(v);
    out << '\n';
  }
  write_text_file(path, out.str());
}

PcaTable read_pca_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0].rfind("sample_id,", 0) != 0)
    throw IoError(path + ": missing pca header");
  PcaTable table;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_on(lines[ln], ',');
    if (fields.size() < 2)
      throw IoError(path + ":" + std::to_string(ln + 1) + ": malformed pca row");
    table.sample_ids.push_back(fields[0]);
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(std::stod(fields[i]));
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_pca_csv(const std::string& path, const std::vector<std::string>& sample_ids,
                   const std::vector<std::vector<double>>& rows) {
  if (sample_ids.size() != rows.size()) throw GeometryError("pca csv id/row mismatch");
  std::ostringstream out;
  out << "sample_id";
  const std::size_t dim = rows.empty() ? 0 : rows[0].size();
  for (std::size_t j = 0; j < dim; ++j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), ",pc%02zu", j + 1);
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << sample_ids[i];
    for (double v : rows[i]) out << ',' << fmt_g17(v);
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace bimodal::physio

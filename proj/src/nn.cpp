#include "bimodal/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "bimodal/textio.hpp"

namespace bimodal::nn {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw GeometryError("zero dimension in tensor shape");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_product(shape_) != data_.size())
    throw GeometryError("tensor shape does not match value count");
}

Tensor Tensor::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw GeometryError("rows() on non-matrix tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw GeometryError("cols() on non-matrix tensor");
  return shape_[1];
}

double& Tensor::at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
double Tensor::at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::reshape_to(std::vector<std::size_t> shape) {
  const std::size_t n = shape_product(shape);
  shape_ = std::move(shape);
  data_.resize(n);
}

// ---- ParamSet ---------------------------------------------------------------

Tensor& ParamSet::add(const std::string& name, Tensor init) {
  for (const Entry& e : entries_)
    if (e.name == name) throw StateError("duplicate parameter name: " + name);
  Tensor grad(init.shape());
  entries_.push_back(Entry{name, std::move(init), std::move(grad)});
  return entries_.back().value;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw StateError("unknown parameter: " + name);
}

Tensor& ParamSet::value(const std::string& name) { return entries_[index_of(name)].value; }
const Tensor& ParamSet::value(const std::string& name) const {
  return entries_[index_of(name)].value;
}
Tensor& ParamSet::grad(const std::string& name) { return entries_[index_of(name)].grad; }

bool ParamSet::has(const std::string& name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.value.size();
  return n;
}

void ParamSet::zero_grads() {
  for (Entry& e : entries_) e.grad.fill(0.0);
}

// ---- ops --------------------------------------------------------------------

namespace {

// Output-blocked inner kernels: a local accumulator block stays in registers
// across the kernel taps instead of re-reading the output row per tap.
constexpr std::size_t kConvBlock = 28;

void conv1d_row(const double* __restrict x, const double* __restrict w, double bias,
                std::size_t width, double* __restrict out, std::size_t out_len) {
  std::size_t i = 0;
  for (; i + kConvBlock <= out_len; i += kConvBlock) {
    double acc[kConvBlock];
    for (std::size_t v = 0; v < kConvBlock; ++v) acc[v] = bias;
    for (std::size_t j = 0; j < width; ++j) {
      const double wj = w[j];
      const double* xs = x + i + j;
      for (std::size_t v = 0; v < kConvBlock; ++v) acc[v] += wj * xs[v];
    }
    for (std::size_t v = 0; v < kConvBlock; ++v) out[i + v] = acc[v];
  }
  for (; i < out_len; ++i) {
    double acc = bias;
    for (std::size_t j = 0; j < width; ++j) acc += w[j] * x[i + j];
    out[i] = acc;
  }
}

template <std::size_t Side>
void conv2d_map_fixed(const double* __restrict in, std::size_t in_cols,
                      const double* __restrict kw, double bias, double* __restrict out,
                      std::size_t out_rows, std::size_t out_cols) {
  for (std::size_t i = 0; i < out_rows; ++i) {
    double* orow = out + i * out_cols;
    std::size_t j = 0;
    for (; j + kConvBlock <= out_cols; j += kConvBlock) {
      double acc[kConvBlock];
      for (std::size_t v = 0; v < kConvBlock; ++v) acc[v] = bias;
      for (std::size_t a = 0; a < Side; ++a) {
        const double* irow = in + (i + a) * in_cols + j;
        for (std::size_t b = 0; b < Side; ++b) {
          const double w = kw[a * Side + b];
          for (std::size_t v = 0; v < kConvBlock; ++v) acc[v] += w * irow[b + v];
        }
      }
      for (std::size_t v = 0; v < kConvBlock; ++v) orow[j + v] = acc[v];
    }
    for (; j < out_cols; ++j) {
      double acc = bias;
      for (std::size_t a = 0; a < Side; ++a) {
        const double* irow = in + (i + a) * in_cols + j;
        for (std::size_t b = 0; b < Side; ++b) acc += kw[a * Side + b] * irow[b];
      }
      orow[j] = acc;
    }
  }
}

void conv2d_map(const double* in, std::size_t in_cols, const double* kw, std::size_t side,
                double bias, double* out, std::size_t out_rows, std::size_t out_cols) {
  switch (side) {
    case 1: conv2d_map_fixed<1>(in, in_cols, kw, bias, out, out_rows, out_cols); return;
    case 2: conv2d_map_fixed<2>(in, in_cols, kw, bias, out, out_rows, out_cols); return;
    case 3: conv2d_map_fixed<3>(in, in_cols, kw, bias, out, out_rows, out_cols); return;
    case 4: conv2d_map_fixed<4>(in, in_cols, kw, bias, out, out_rows, out_cols); return;
    case 5: conv2d_map_fixed<5>(in, in_cols, kw, bias, out, out_rows, out_cols); return;
    default: break;
  }
  for (std::size_t i = 0; i < out_rows; ++i)
    for (std::size_t j = 0; j < out_cols; ++j) {
      double acc = bias;
      for (std::size_t a = 0; a < side; ++a) {
        const double* irow = in + (i + a) * in_cols + j;
        for (std::size_t b = 0; b < side; ++b) acc += kw[a * side + b] * irow[b];
      }
      out[i * out_cols + j] = acc;
    }
}

}  // namespace

void conv1d_forward_into(const Tensor& input, const Tensor& kernels, const Tensor& biases,
                         Tensor& out) {
  if (input.ndim() != 1) throw GeometryError("conv1d input must be rank 1");
  if (kernels.ndim() != 2) throw GeometryError("conv1d kernels must be rank 2 (K, w)");
  const std::size_t len = input.size();
  const std::size_t n_kernels = kernels.shape()[0];
  const std::size_t width = kernels.shape()[1];
  if (biases.size() != n_kernels) throw GeometryError("conv1d bias count != kernel count");
  if (len < width)
    throw GeometryError("conv1d input length " + std::to_string(len) +
                        " shorter than kernel width " + std::to_string(width));

  const std::size_t out_len = len - width + 1;
  out.reshape_to({n_kernels, out_len});
  for (std::size_t k = 0; k < n_kernels; ++k)
    conv1d_row(input.data(), kernels.data() + k * width, biases[k], width,
               out.data() + k * out_len, out_len);
}

Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& biases) {
  Tensor out;
  conv1d_forward_into(input, kernels, biases, out);
  return out;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& biases) {
  if (input.ndim() != 2) throw GeometryError("conv2d input must be rank 2");
  if (kernels.ndim() != 3 || kernels.shape()[1] != kernels.shape()[2])
    throw GeometryError("conv2d kernels must be rank 3 (K, s, s) and square");
  const std::size_t in_rows = input.shape()[0];
  const std::size_t in_cols = input.shape()[1];
  const std::size_t n_kernels = kernels.shape()[0];
  const std::size_t side = kernels.shape()[1];
  if (biases.size() != n_kernels) throw GeometryError("conv2d bias count != kernel count");
  if (in_rows < side || in_cols < side)
    throw GeometryError("conv2d input " + std::to_string(in_rows) + "x" +
                        std::to_string(in_cols) + " smaller than kernel side " +
                        std::to_string(side));

  const std::size_t out_rows = in_rows - side + 1;
  const std::size_t out_cols = in_cols - side + 1;
  Tensor out({n_kernels, out_rows, out_cols});
  for (std::size_t k = 0; k < n_kernels; ++k)
    conv2d_map(input.data(), in_cols, kernels.data() + k * side * side, side, biases[k],
               out.data() + k * out_rows * out_cols, out_rows, out_cols);
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const double* in = x.data();
  double* o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
  return out;
}

PoolResult global_max_pool(const Tensor& feature_map) {
  if (feature_map.size() == 0) throw GeometryError("global_max_pool on empty map");
  const double* v = feature_map.data();
  PoolResult r{v[0], 0};
  for (std::size_t i = 1; i < feature_map.size(); ++i) {
    if (v[i] > r.value) {
      r.value = v[i];
      r.argmax = i;
    }
  }
  return r;
}

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.ndim() != 1 || weight.ndim() != 2)
    throw GeometryError("dense expects vector input and matrix weight");
  const std::size_t out_dim = weight.shape()[0];
  const std::size_t in_dim = weight.shape()[1];
  if (x.size() != in_dim || bias.size() != out_dim)
    throw GeometryError("dense shape mismatch: x " + std::to_string(x.size()) + ", W " +
                        std::to_string(out_dim) + "x" + std::to_string(in_dim) + ", b " +
                        std::to_string(bias.size()));
  Tensor y({out_dim});
  for (std::size_t o = 0; o < out_dim; ++o) {
    const double* wrow = weight.data() + o * in_dim;
    double acc = bias[o];
    for (std::size_t i = 0; i < in_dim; ++i) acc += wrow[i] * x[i];
    y[o] = acc;
  }
  return y;
}

LossGrad softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  const std::size_t n = logits.size();
  if (label >= n)
    throw DataError("label " + std::to_string(label) + " out of range for " +
                    std::to_string(n) + " classes");
  double max_logit = logits[0];
  for (std::size_t i = 1; i < n; ++i) max_logit = std::max(max_logit, logits[i]);

  LossGrad out;
  out.grad = Tensor({n});
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.grad[i] = std::exp(logits[i] - max_logit);
    sum += out.grad[i];
  }
  for (std::size_t i = 0; i < n; ++i) out.grad[i] /= sum;
  out.loss = std::log(sum) - (logits[label] - max_logit);
  out.grad[label] -= 1.0;
  return out;
}

// ---- Adam -------------------------------------------------------------------

Adam::Adam(const ParamSet& params, AdamConfig config) : config_(config) {
  m_.reserve(params.count());
  v_.reserve(params.count());
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.value.shape());
    v_.emplace_back(e.value.shape());
  }
}

void Adam::step(ParamSet& params) {
  if (params.count() != m_.size())
    throw StateError("optimizer state does not match parameter set");
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t p = 0; p < m_.size(); ++p) {
    auto& entry = params.entries()[p];
    if (!entry.value.same_shape(m_[p]))
      throw StateError("moment shape mismatch for " + entry.name);
    double* theta = entry.value.data();
    double* g = entry.grad.data();
    double* m = m_[p].data();
    double* v = v_[p].data();
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      g[i] = 0.0;
    }
  }
}

// ---- grad_check ---------------------------------------------------------------

double grad_check(Network& net, const Tensor& input, std::size_t label, double eps,
                  const GradMutator& mutate) {
  if (eps <= 0) throw ConfigError("grad_check eps must be positive");
  ParamSet& params = net.params();
  params.zero_grads();
  {
    Tensor scores = net.forward(input);
    LossGrad lg = softmax_cross_entropy(scores, label);
    net.backward(lg.grad);
  }
  // Snapshot analytic gradients; numeric probing reuses the live parameters.
  std::vector<Tensor> analytic;
  analytic.reserve(params.count());
  for (const auto& e : params.entries()) analytic.push_back(e.grad);
  if (mutate) {
    mutate(params);
    analytic.clear();
    for (const auto& e : params.entries()) analytic.push_back(e.grad);
  }

  auto loss_at = [&]() {
    Tensor scores = net.forward(input);
    return softmax_cross_entropy(scores, label).loss;
  };

  double worst = 0.0;
  for (std::size_t p = 0; p < params.count(); ++p) {
    Tensor& theta = params.entries()[p].value;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + eps;
      const double loss_plus = loss_at();
      theta[i] = saved - eps;
      const double loss_minus = loss_at();
      theta[i] = saved;
      const double numeric = (loss_plus - loss_minus) / (2.0 * eps);
      const double a = analytic[p][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  params.zero_grads();
  return worst;
}

// ---- persistence ----------------------------------------------------------

void save_params(std::ostream& out, const ParamSet& params) {
  for (const auto& e : params.entries()) {
    out << "param " << e.name << ' ' << e.value.ndim();
    for (std::size_t d : e.value.shape()) out << ' ' << d;
    out << '\n';
    const double* v = e.value.data();
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      if (i) out << ' ';
      out << fmt_g17(v[i]);
    }
    out << '\n';
  }
}

void load_params(std::istream& in, ParamSet& params) {
  std::size_t loaded = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream header(line);
    std::string tag, name;
    std::size_t ndim = 0;
    header >> tag >> name >> ndim;
    if (tag != "param" || header.fail())
      throw IoError("malformed parameter header: " + line);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) header >> d;
    if (header.fail()) throw IoError("malformed shape for parameter " + name);
    if (!params.has(name)) throw IoError("checkpoint has unknown parameter " + name);
    Tensor& target = params.value(name);
    if (target.shape() != shape) throw IoError("shape mismatch for parameter " + name);
    if (!std::getline(in, line)) throw IoError("missing values for parameter " + name);
    std::istringstream values(line);
    for (std::size_t i = 0; i < target.size(); ++i) {
      values >> target[i];
      if (values.fail()) throw IoError("short value row for parameter " + name);
    }
    ++loaded;
  }
  if (loaded != params.count())
    throw IoError("checkpoint holds " + std::to_string(loaded) + " parameters, expected " +
                  std::to_string(params.count()));
}

std::uint64_t param_checksum(const ParamSet& params) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV offset basis
  auto mix = [&h](const void* bytes, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& e : params.entries()) {
    mix(e.name.data(), e.name.size());
    mix(e.value.data(), e.value.size() * sizeof(double));
  }
  return h;
}

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng) {
  if (fan_in == 0) throw ConfigError("uniform_init fan_in must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace bimodal::nn

#include "bimodal/nets.hpp"

#include <fstream>
#include <sstream>

#include "bimodal/rng.hpp"
#include "bimodal/textio.hpp"

namespace bimodal::nets {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::physiological: return "physiological";
    case Modality::linguistic: return "linguistic";
    case Modality::bimodal: return "bimodal";
  }
  throw ConfigError("unhandled modality");
}

Modality modality_from_string(const std::string& s) {
  if (s == "physiological" || s == "phys") return Modality::physiological;
  if (s == "linguistic" || s == "ling") return Modality::linguistic;
  if (s == "bimodal") return Modality::bimodal;
  throw ConfigError("unknown modality: " + s);
}

namespace {

std::string bank_name(std::size_t size) { return "conv" + std::to_string(size); }

void init_conv_bank_params(nn::ParamSet& params, const NetworkSpec& spec, bool square,
                           std::mt19937_64& rng) {
  for (std::size_t s : spec.filter_sizes) {
    const std::size_t fan_in = square ? s * s : s;
    std::vector<std::size_t> shape =
        square ? std::vector<std::size_t>{spec.filters_per_size, s, s}
               : std::vector<std::size_t>{spec.filters_per_size, s};
    params.add(bank_name(s) + ".weight", nn::uniform_init(shape, fan_in, rng));
    params.add(bank_name(s) + ".bias", nn::Tensor({spec.filters_per_size}));
  }
  params.add("fc.weight",
             nn::uniform_init({spec.classes, spec.pooled_features()}, spec.pooled_features(), rng));
  params.add("fc.bias", nn::Tensor({spec.classes}));
}

// conv banks -> ReLU -> global max pool, shared by both unimodal nets.
// relu is monotone, so the pooled value is max(0, max pre-activation) and the
// argmax of the relu map coincides with the pre-activation argmax when the
// max is positive.
void pool_banks(const std::vector<nn::Tensor>& preact, const NetworkSpec& spec,
                std::vector<std::size_t>& pool_arg, std::vector<bool>& pool_active,
                nn::Tensor& pooled) {
  pooled = nn::Tensor({spec.pooled_features()});
  pool_arg.assign(spec.pooled_features(), 0);
  pool_active.assign(spec.pooled_features(), false);
  std::size_t slot = 0;
  for (std::size_t bank = 0; bank < preact.size(); ++bank) {
    const nn::Tensor& maps = preact[bank];
    const std::size_t map_len = maps.size() / spec.filters_per_size;
    for (std::size_t f = 0; f < spec.filters_per_size; ++f, ++slot) {
      const double* m = maps.data() + f * map_len;
      double best = m[0];
      std::size_t arg = 0;
      for (std::size_t i = 1; i < map_len; ++i) {
        if (m[i] > best) {
          best = m[i];
          arg = i;
        }
      }
      if (best > 0.0) {
        pooled[slot] = best;
        pool_arg[slot] = arg;
        pool_active[slot] = true;
      }  // else: the whole relu map is zero and nothing routes back
    }
  }
}

void dense_backward_accumulate(nn::ParamSet& params, const nn::Tensor& x,
                               const nn::Tensor& score_grad, nn::Tensor& x_grad) {
  const nn::Tensor& w = params.value("fc.weight");
  nn::Tensor& dw = params.grad("fc.weight");
  nn::Tensor& db = params.grad("fc.bias");
  const std::size_t out_dim = w.shape()[0];
  const std::size_t in_dim = w.shape()[1];
  if (score_grad.size() != out_dim) throw GeometryError("score gradient has wrong length");
  x_grad = nn::Tensor({in_dim});
  for (std::size_t o = 0; o < out_dim; ++o) {
    const double g = score_grad[o];
    db[o] += g;
    const double* wrow = w.data() + o * in_dim;
    double* dwrow = dw.data() + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) {
      dwrow[i] += g * x[i];
      x_grad[i] += g * wrow[i];
    }
  }
}

}  // namespace

// ---- PhysNet ----------------------------------------------------------------

PhysNet::PhysNet(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  auto rng = make_engine(seed);
  init_conv_bank_params(params_, spec_, /*square=*/false, rng);
}

nn::Tensor PhysNet::forward(const nn::Tensor& input) {
  if (input.ndim() != 1 || input.size() != spec_.input_cols)
    throw GeometryError("PhysNet expects a length-" + std::to_string(spec_.input_cols) +
                        " vector, got " + std::to_string(input.size()));
  input_ = input;
  preact_.clear();
  for (std::size_t s : spec_.filter_sizes)
    preact_.push_back(nn::conv1d_forward(input, params_.value(bank_name(s) + ".weight"),
                                         params_.value(bank_name(s) + ".bias")));
  pool_banks(preact_, spec_, pool_arg_, pool_active_, pooled_);
  has_cache_ = true;
  return nn::dense_forward(pooled_, params_.value("fc.weight"), params_.value("fc.bias"));
}

void PhysNet::backward(const nn::Tensor& score_grad) {
  if (!has_cache_) throw StateError("PhysNet backward before forward");
  nn::Tensor d_pooled;
  dense_backward_accumulate(params_, pooled_, score_grad, d_pooled);
  std::size_t slot = 0;
  for (std::size_t bank = 0; bank < spec_.filter_sizes.size(); ++bank) {
    const std::size_t width = spec_.filter_sizes[bank];
    nn::Tensor& dw = params_.grad(bank_name(width) + ".weight");
    nn::Tensor& db = params_.grad(bank_name(width) + ".bias");
    for (std::size_t f = 0; f < spec_.filters_per_size; ++f, ++slot) {
      if (!pool_active_[slot]) continue;  // relu clipped the pooled maximum
      const double g = d_pooled[slot];
      const std::size_t start = pool_arg_[slot];
      double* dwf = dw.data() + f * width;
      for (std::size_t j = 0; j < width; ++j) dwf[j] += g * input_[start + j];
      db[f] += g;
    }
  }
}

// ---- LingNet ----------------------------------------------------------------

LingNet::LingNet(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  auto rng = make_engine(seed);
  init_conv_bank_params(params_, spec_, /*square=*/true, rng);
}

nn::Tensor LingNet::forward(const nn::Tensor& input) {
  if (input.ndim() != 2 || input.cols() != spec_.input_cols)
    throw GeometryError("LingNet expects an Mx" + std::to_string(spec_.input_cols) + " array");
  std::size_t largest = 0;
  for (std::size_t s : spec_.filter_sizes) largest = std::max(largest, s);
  if (input.rows() < largest)
    throw GeometryError("transcript array has " + std::to_string(input.rows()) +
                        " rows, smaller than the largest filter side " +
                        std::to_string(largest));
  input_ = input;
  preact_.clear();
  for (std::size_t s : spec_.filter_sizes)
    preact_.push_back(nn::conv2d_forward(input, params_.value(bank_name(s) + ".weight"),
                                         params_.value(bank_name(s) + ".bias")));
  pool_banks(preact_, spec_, pool_arg_, pool_active_, pooled_);
  has_cache_ = true;
  return nn::dense_forward(pooled_, params_.value("fc.weight"), params_.value("fc.bias"));
}

void LingNet::backward(const nn::Tensor& score_grad) {
  if (!has_cache_) throw StateError("LingNet backward before forward");
  nn::Tensor d_pooled;
  dense_backward_accumulate(params_, pooled_, score_grad, d_pooled);
  const std::size_t in_cols = input_.cols();
  std::size_t slot = 0;
  for (std::size_t bank = 0; bank < spec_.filter_sizes.size(); ++bank) {
    const std::size_t side = spec_.filter_sizes[bank];
    const std::size_t out_cols = in_cols - side + 1;
    nn::Tensor& dw = params_.grad(bank_name(side) + ".weight");
    nn::Tensor& db = params_.grad(bank_name(side) + ".bias");
    for (std::size_t f = 0; f < spec_.filters_per_size; ++f, ++slot) {
      if (!pool_active_[slot]) continue;
      const double g = d_pooled[slot];
      const std::size_t i = pool_arg_[slot] / out_cols;
      const std::size_t j = pool_arg_[slot] % out_cols;
      double* dwf = dw.data() + f * side * side;
      for (std::size_t a = 0; a < side; ++a) {
        const double* irow = input_.data() + (i + a) * in_cols + j;
        for (std::size_t b = 0; b < side; ++b) dwf[a * side + b] += g * irow[b];
      }
      db[f] += g;
    }
  }
}

// ---- FusionNet --------------------------------------------------------------

FusionNet::FusionNet(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  auto rng = make_engine(seed);
  params_.add("fc.weight",
              nn::uniform_init({spec_.classes, spec_.input_cols}, spec_.input_cols, rng));
  params_.add("fc.bias", nn::Tensor({spec_.classes}));
}

nn::Tensor FusionNet::forward(const nn::Tensor& input) {
  if (input.ndim() != 1 || input.size() != spec_.input_cols)
    throw GeometryError("FusionNet expects a length-" + std::to_string(spec_.input_cols) +
                        " vector");
  input_ = input;
  has_cache_ = true;
  return nn::dense_forward(input, params_.value("fc.weight"), params_.value("fc.bias"));
}

void FusionNet::backward(const nn::Tensor& score_grad) {
  if (!has_cache_) throw StateError("FusionNet backward before forward");
  nn::Tensor d_input;
  dense_backward_accumulate(params_, input_, score_grad, d_input);
}

// ---- helpers ----------------------------------------------------------------

NetworkSpec default_phys_spec(std::size_t filters_per_size) {
  NetworkSpec spec;
  spec.modality = Modality::physiological;
  spec.filters_per_size = filters_per_size;
  spec.input_rows = 1;
  spec.input_cols = 32;
  return spec;
}

NetworkSpec default_ling_spec(std::size_t padded_len, std::size_t filters_per_size) {
  NetworkSpec spec;
  spec.modality = Modality::linguistic;
  spec.filters_per_size = filters_per_size;
  spec.input_rows = padded_len;
  spec.input_cols = 32;
  return spec;
}

NetworkSpec default_fusion_spec() {
  NetworkSpec spec;
  spec.modality = Modality::bimodal;
  spec.filter_sizes.clear();
  spec.filters_per_size = 0;
  spec.input_rows = 1;
  spec.input_cols = 4;
  return spec;
}

std::unique_ptr<nn::Network> make_network(const NetworkSpec& spec, std::uint64_t seed) {
  switch (spec.modality) {
    case Modality::physiological: return std::make_unique<PhysNet>(spec, seed);
    case Modality::linguistic: return std::make_unique<LingNet>(spec, seed);
    case Modality::bimodal: return std::make_unique<FusionNet>(spec, seed);
  }
  throw ConfigError("unhandled modality");
}

nn::Tensor fuse_input(const std::array<double, 2>& ling_scores,
                      const std::array<double, 2>& phys_scores) {
  return nn::Tensor::vector({ling_scores[0], ling_scores[1], phys_scores[0], phys_scores[1]});
}

int predict(const nn::Tensor& scores) {
  if (scores.size() != 2) throw GeometryError("predict expects two class scores");
  return scores[1] >= scores[0] ? 1 : 0;
}

int predict(const std::array<double, 2>& scores) { return scores[1] >= scores[0] ? 1 : 0; }

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const nn::ParamSet& params) {
  std::ostringstream out;
  out << "bimodal-checkpoint 1\n";
  out << "modality " << to_string(spec.modality) << '\n';
  out << "filter_sizes";
  for (std::size_t s : spec.filter_sizes) out << ' ' << s;
  out << '\n';
  out << "filters_per_size " << spec.filters_per_size << '\n';
  out << "input_rows " << spec.input_rows << '\n';
  out << "input_cols " << spec.input_cols << '\n';
  out << "classes " << spec.classes << '\n';
  nn::save_params(out, params);
  write_text_file(path, out.str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != "bimodal-checkpoint 1")
    throw IoError("not a checkpoint file: " + path);

  NetworkSpec spec;
  spec.filter_sizes.clear();
  for (int i = 0; i < 6; ++i) {
    if (!std::getline(in, line)) throw IoError("truncated checkpoint header in " + path);
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "modality") {
      std::string value;
      ss >> value;
      spec.modality = modality_from_string(value);
    } else if (key == "filter_sizes") {
      std::size_t s;
      while (ss >> s) spec.filter_sizes.push_back(s);
    } else if (key == "filters_per_size") {
      ss >> spec.filters_per_size;
    } else if (key == "input_rows") {
      ss >> spec.input_rows;
    } else if (key == "input_cols") {
      ss >> spec.input_cols;
    } else if (key == "classes") {
      ss >> spec.classes;
    } else {
      throw IoError("unexpected checkpoint header line: " + line);
    }
  }

  Checkpoint cp;
  cp.spec = spec;
  cp.net = make_network(spec, /*seed=*/0);
  nn::load_params(in, cp.net->params());
  return cp;
}

}  // namespace bimodal::nets

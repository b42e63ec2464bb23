#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "bimodal/errors.hpp"

namespace bimodal::nn {

// Dense row-major array of doubles; the only numeric carrier in the network
// code. Shapes are checked at construction and by the ops below.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  // In-place reshape; keeps the existing buffer when the element count fits.
  void reshape_to(std::vector<std::size_t> shape);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Named parameters, each with one gradient buffer of identical shape.
// Iteration follows registration order, which keeps checkpoints, checksums
// and optimizer state stable.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  Tensor& add(const std::string& name, Tensor init);
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  bool has(const std::string& name) const;

  std::size_t count() const { return entries_.size(); }
  std::size_t total_size() const;
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  void zero_grads();

 private:
  std::size_t index_of(const std::string& name) const;
  std::vector<Entry> entries_;
};

// ---- layer ops ------------------------------------------------------------

// Valid cross-correlation of a length-L signal with K kernels of width w.
// Returns K maps of length L-w+1.
Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& biases);

// Valid cross-correlation of an HxW input with K square s x s kernels.
// Returns K maps of shape (H-s+1) x (W-s+1).
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& biases);

// Allocation-free variants for training loops; `out` is reshaped in place.
void conv1d_forward_into(const Tensor& input, const Tensor& kernels, const Tensor& biases,
                         Tensor& out);
void conv2d_forward_into(const Tensor& input, const Tensor& kernels, const Tensor& biases,
                         Tensor& out);

Tensor relu(const Tensor& x);

struct PoolResult {
  double value = 0;
  std::size_t argmax = 0;  // first flat index attaining the max
};
PoolResult global_max_pool(const Tensor& feature_map);

// y = Wx + b with W of shape (o, d).
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct LossGrad {
  double loss = 0;
  Tensor grad;  // d loss / d logits
};
// Max-subtraction stabilized softmax cross-entropy for one sample.
LossGrad softmax_cross_entropy(const Tensor& logits, std::size_t label);

// ---- networks -------------------------------------------------------------

// A network owns its parameters and the caches its backward pass needs.
// forward() records caches; backward() accumulates into the parameter
// gradients and throws StateError when no forward pass has been cached.
class Network {
 public:
  virtual ~Network() = default;
  virtual Tensor forward(const Tensor& input) = 0;
  virtual void backward(const Tensor& score_grad) = 0;
  virtual ParamSet& params() = 0;
  const ParamSet& params() const { return const_cast<Network*>(this)->params(); }
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected adaptive-moment optimizer. step() applies the update in
// place and clears the gradients afterwards.
class Adam {
 public:
  explicit Adam(const ParamSet& params, AdamConfig config = {});
  void step(ParamSet& params);
  std::uint64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const Tensor& first_moment(std::size_t param_index) const { return m_[param_index]; }
  const Tensor& second_moment(std::size_t param_index) const { return v_[param_index]; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_, v_;
  std::uint64_t steps_ = 0;
};

// ---- verification ---------------------------------------------------------

// Optional hook that tampers with the analytic gradients before they are
// compared; used by mutation tests to prove the checker can fail.
using GradMutator = std::function<void(ParamSet&)>;

// Central-difference check of d loss / d theta for every parameter component,
// where loss = softmax_cross_entropy(net(input), label). Returns the worst
// relative error with denominator max(|analytic|, |numeric|, 1e-8).
double grad_check(Network& net, const Tensor& input, std::size_t label, double eps,
                  const GradMutator& mutate = nullptr);

// ---- persistence ----------------------------------------------------------

// Text block: one "param <name> <ndim> <dims...>" line followed by one line
// of %.17g values. Round-trips are value-exact.
void save_params(std::ostream& out, const ParamSet& params);
// Fills an existing ParamSet; names and shapes must match exactly.
void load_params(std::istream& in, ParamSet& params);

// FNV-1a over parameter names and raw value bytes, in registration order.
std::uint64_t param_checksum(const ParamSet& params);

// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace bimodal::nn

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bimodal/nn.hpp"

namespace bimodal::nets {

enum class Modality { physiological, linguistic, bimodal };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

// Geometry and capacity of one network, serialized next to its weights so a
// checkpoint is self-describing.
struct NetworkSpec {
  Modality modality = Modality::physiological;
  std::vector<std::size_t> filter_sizes{3, 4, 5};
  std::size_t filters_per_size = 8;
  std::size_t input_rows = 1;   // linguistic: padded transcript length M
  std::size_t input_cols = 32;  // physiological: 32, linguistic: embedding dim, bimodal: 4
  std::size_t classes = 2;

  std::size_t pooled_features() const { return filter_sizes.size() * filters_per_size; }
};

// 1-D conv banks (widths 3/4/5) -> ReLU -> global max pool -> dense scores.
class PhysNet : public nn::Network {
 public:
  PhysNet(const NetworkSpec& spec, std::uint64_t seed);
  nn::Tensor forward(const nn::Tensor& input) override;
  void backward(const nn::Tensor& score_grad) override;
  using nn::Network::params;
  nn::ParamSet& params() override { return params_; }
  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  nn::ParamSet params_;
  // forward caches
  bool has_cache_ = false;
  nn::Tensor input_;
  std::vector<nn::Tensor> preact_;       // per filter bank
  std::vector<std::size_t> pool_arg_;    // per map, flat index into its bank
  std::vector<bool> pool_active_;        // pre-activation at argmax > 0
  nn::Tensor pooled_;
};

// Square 2-D conv banks (3x3/4x4/5x5) over the M x 32 embedded transcript.
// Global max pooling makes the head independent of M.
class LingNet : public nn::Network {
 public:
  LingNet(const NetworkSpec& spec, std::uint64_t seed);
  nn::Tensor forward(const nn::Tensor& input) override;
  void backward(const nn::Tensor& score_grad) override;
  using nn::Network::params;
  nn::ParamSet& params() override { return params_; }
  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  nn::ParamSet params_;
  bool has_cache_ = false;
  nn::Tensor input_;
  std::vector<nn::Tensor> preact_;
  std::vector<std::size_t> pool_arg_;
  std::vector<bool> pool_active_;
  nn::Tensor pooled_;
};

// Single dense layer over the concatenated unimodal score pair.
class FusionNet : public nn::Network {
 public:
  FusionNet(const NetworkSpec& spec, std::uint64_t seed);
  nn::Tensor forward(const nn::Tensor& input) override;
  void backward(const nn::Tensor& score_grad) override;
  using nn::Network::params;
  nn::ParamSet& params() override { return params_; }
  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  nn::ParamSet params_;
  bool has_cache_ = false;
  nn::Tensor input_;
};

NetworkSpec default_phys_spec(std::size_t filters_per_size = 8);
NetworkSpec default_ling_spec(std::size_t padded_len, std::size_t filters_per_size = 8);
NetworkSpec default_fusion_spec();

std::unique_ptr<nn::Network> make_network(const NetworkSpec& spec, std::uint64_t seed);

// Fusion input is [linguistic scores ++ physiological scores].
nn::Tensor fuse_input(const std::array<double, 2>& ling_scores,
                      const std::array<double, 2>& phys_scores);

// Argmax over class scores; an exact tie goes to deceptive (1).
int predict(const nn::Tensor& scores);
int predict(const std::array<double, 2>& scores);

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const nn::ParamSet& params);

struct Checkpoint {
  NetworkSpec spec;
  std::unique_ptr<nn::Network> net;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bimodal::nets

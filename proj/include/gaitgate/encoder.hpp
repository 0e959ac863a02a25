#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gaitgate/signal.hpp"

namespace gaitgate {

// Named dense tensor, row-major.
template <typename T>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> values;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

template <typename T>
struct BasicParameterSet {
  std::vector<Tensor<T>> tensors;

  Tensor<T>* find(std::string_view name);
  const Tensor<T>* find(std::string_view name) const;
  const Tensor<T>& at(std::string_view name) const;
  Tensor<T>& at(std::string_view name);

  std::size_t total_size() const;
  // Same names and shapes, all values zero.
  BasicParameterSet zeros_like() const;

  bool operator==(const BasicParameterSet&) const = default;
};

template <typename T>
bool operator==(const Tensor<T>& a, const Tensor<T>& b) {
  return a.name == b.name && a.shape == b.shape && a.values == b.values;
}

using ParameterSet = BasicParameterSet<float>;

template <typename To, typename From>
BasicParameterSet<To> cast_params(const BasicParameterSet<From>& in) {
  BasicParameterSet<To> out;
  out.tensors.reserve(in.tensors.size());
  for (const auto& t : in.tensors) {
    out.tensors.push_back({t.name, t.shape, std::vector<To>(t.values.begin(), t.values.end())});
  }
  return out;
}

// Contracting CNN: per stage conv3x3 (same padding) -> ReLU -> maxpool 2x2
// (floor), then global average pool, dense to D, L2 normalize.
struct EncoderConfig {
  std::size_t input_freq = 65;
  std::size_t input_frames = 14;
  std::vector<std::size_t> conv_channels{16, 32, 64};
  std::size_t embedding_dim = 64;
  std::uint64_t init_seed = 0;

  // Spatial size entering stage s (s == stages() gives the final size).
  std::pair<std::size_t, std::size_t> spatial_at(std::size_t stage) const;
  std::size_t stages() const { return conv_channels.size(); }
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

// Drops trailing conv stages whose pooling would collapse an input of
// (freq, frames) below 1x1. Keeps at least one stage.
std::vector<std::size_t> fit_stages_to_input(std::vector<std::size_t> channels,
                                             std::size_t freq,
                                             std::size_t frames);

struct Embedding {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const Embedding&) const = default;
};

struct Model {
  EncoderConfig config;
  ParameterSet params;
};

// He-uniform fan-in weights, zero biases, deterministic in init_seed.
ParameterSet init_params(const EncoderConfig& cfg);

// Rebuilds the config implied by tensor shapes plus an input shape.
EncoderConfig infer_config(const ParameterSet& params, std::size_t freq,
                           std::size_t frames);

Embedding forward(const Model& model, const Spectrogram& spec);
std::vector<Embedding> forward_batch(const Model& model,
                                     std::span<const Spectrogram> specs);

// Generic-precision network used by forward() and by the trainer.
template <typename T>
struct ForwardCache {
  struct Stage {
    std::size_t in_ch = 0, out_ch = 0, height = 0, width = 0;
    std::vector<T> cols;       // im2col of the stage input, (in_ch*9) x (h*w)
    std::vector<T> act;        // post-ReLU, out_ch x h x w
    std::vector<std::uint32_t> argmax;  // per pooled cell, index into act
    std::size_t pooled_h = 0, pooled_w = 0;
  };
  std::vector<Stage> stages;
  std::vector<T> pooled;  // output of the last stage
  std::vector<T> gap;     // global average pool, last_ch
  std::vector<T> pre;     // dense output before normalization, D
  std::vector<T> z;       // unit-norm embedding, D
  T norm = T{0};
};

// Runs the network; fills `cache` when non-null. Throws kNumeric on a zero
// or non-finite pre-normalization vector ("degenerate embedding").
template <typename T>
std::vector<T> encoder_forward(const EncoderConfig& cfg,
                               const BasicParameterSet<T>& params,
                               const Spectrogram& spec, ForwardCache<T>* cache);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/dz.
template <typename T>
void encoder_backward(const EncoderConfig& cfg,
                      const BasicParameterSet<T>& params,
                      const ForwardCache<T>& cache, std::span<const T> dz,
                      BasicParameterSet<T>& grads);

std::string conv_weight_name(std::size_t stage);
std::string conv_bias_name(std::size_t stage);
inline constexpr std::string_view kDenseWeight = "dense.weight";
inline constexpr std::string_view kDenseBias = "dense.bias";

}  // namespace gaitgate

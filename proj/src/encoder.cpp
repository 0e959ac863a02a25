#include "gaitgate/encoder.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "gaitgate/error.hpp"
#include "gaitgate/rng.hpp"

namespace gaitgate {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Tensor order: conv{s}.weight, conv{s}.bias for every stage, then dense.
std::size_t weight_index(std::size_t stage) { return 2 * stage; }
std::size_t bias_index(std::size_t stage) { return 2 * stage + 1; }

template <typename T>
void im2col3x3(const T* in, std::size_t channels, std::size_t h, std::size_t w,
               T* cols) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = in + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* row = cols + ((c * 3 + ky) * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          T* dst = row + y * w;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const auto sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            dst[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w))
                         ? T{0}
                         : src[static_cast<std::size_t>(sx)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im3x3(const T* cols, std::size_t channels, std::size_t h,
               std::size_t w, T* out) {
  const std::size_t hw = h * w;
  std::fill(out, out + channels * hw, T{0});
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = out + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* row = cols + ((c * 3 + ky) * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = plane + static_cast<std::size_t>(sy) * w;
          const T* src = row + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            const auto sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            dst[static_cast<std::size_t>(sx)] += src[x];
          }
        }
      }
    }
  }
}

template <typename T>
void check_layout(const EncoderConfig& cfg, const BasicParameterSet<T>& params) {
  const std::size_t expected = 2 * cfg.stages() + 2;
  require(params.tensors.size() == expected,
          "parameter set has " + std::to_string(params.tensors.size()) +
              " tensors, encoder config expects " + std::to_string(expected));
  std::size_t in_ch = 1;
  for (std::size_t s = 0; s < cfg.stages(); ++s) {
    const auto& w = params.tensors[weight_index(s)];
    const auto& b = params.tensors[bias_index(s)];
    const std::vector<std::size_t> wshape{cfg.conv_channels[s], in_ch, 3, 3};
    require(w.name == conv_weight_name(s) && w.shape == wshape,
            "unexpected tensor layout at " + conv_weight_name(s));
    require(b.name == conv_bias_name(s) &&
                b.shape == std::vector<std::size_t>{cfg.conv_channels[s]},
            "unexpected tensor layout at " + conv_bias_name(s));
    in_ch = cfg.conv_channels[s];
  }
  const auto& dw = params.tensors[2 * cfg.stages()];
  const auto& db = params.tensors[2 * cfg.stages() + 1];
  require(dw.name == kDenseWeight &&
              dw.shape == std::vector<std::size_t>{cfg.embedding_dim, in_ch},
          "unexpected tensor layout at dense.weight");
  require(db.name == kDenseBias &&
              db.shape == std::vector<std::size_t>{cfg.embedding_dim},
          "unexpected tensor layout at dense.bias");
}

}  // namespace

std::string conv_weight_name(std::size_t stage) {
  return "conv" + std::to_string(stage) + ".weight";
}
std::string conv_bias_name(std::size_t stage) {
  return "conv" + std::to_string(stage) + ".bias";
}

template <typename T>
Tensor<T>* BasicParameterSet<T>::find(std::string_view name) {
  for (auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

template <typename T>
const Tensor<T>* BasicParameterSet<T>::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

template <typename T>
const Tensor<T>& BasicParameterSet<T>::at(std::string_view name) const {
  const auto* t = find(name);
  require(t != nullptr, "no tensor named '" + std::string(name) + "'");
  return *t;
}

template <typename T>
Tensor<T>& BasicParameterSet<T>::at(std::string_view name) {
  auto* t = find(name);
  require(t != nullptr, "no tensor named '" + std::string(name) + "'");
  return *t;
}

template <typename T>
std::size_t BasicParameterSet<T>::total_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

template <typename T>
BasicParameterSet<T> BasicParameterSet<T>::zeros_like() const {
  BasicParameterSet out;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) {
    out.tensors.push_back({t.name, t.shape, std::vector<T>(t.values.size(), T{0})});
  }
  return out;
}

template struct BasicParameterSet<float>;
template struct BasicParameterSet<double>;

std::pair<std::size_t, std::size_t> EncoderConfig::spatial_at(std::size_t stage) const {
  std::size_t h = input_freq;
  std::size_t w = input_frames;
  for (std::size_t s = 0; s < stage; ++s) {
    h /= 2;
    w /= 2;
  }
  return {h, w};
}

void EncoderConfig::validate() const {
  require(!conv_channels.empty(), "encoder needs at least one conv stage");
  for (auto c : conv_channels) require(c > 0, "conv channel counts must be positive");
  require(embedding_dim >= 2, "embedding_dim must be at least 2");
  require(input_freq > 0 && input_frames > 0, "input shape must be non-empty");
  const auto [h, w] = spatial_at(stages());
  require(h >= 1 && w >= 1,
          "input " + std::to_string(input_freq) + "x" + std::to_string(input_frames) +
              " collapses below 1x1 after " + std::to_string(stages()) +
              " pooling stages");
}

std::vector<std::size_t> fit_stages_to_input(std::vector<std::size_t> channels,
                                             std::size_t freq, std::size_t frames) {
  std::size_t keep = 0;
  std::size_t h = freq;
  std::size_t w = frames;
  while (keep < channels.size() && h / 2 >= 1 && w / 2 >= 1) {
    h /= 2;
    w /= 2;
    ++keep;
  }
  channels.resize(std::max<std::size_t>(keep, 1));
  return channels;
}

ParameterSet init_params(const EncoderConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.init_seed);
  ParameterSet params;
  auto he_uniform = [&](std::string name, std::vector<std::size_t> shape,
                        std::size_t fan_in) {
    Tensor<float> t{std::move(name), std::move(shape), {}};
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    t.values.resize(t.numel());
    for (auto& v : t.values) v = static_cast<float>(rng.uniform(-bound, bound));
    params.tensors.push_back(std::move(t));
  };
  auto zeros = [&](std::string name, std::size_t n) {
    params.tensors.push_back({std::move(name), {n}, std::vector<float>(n, 0.0f)});
  };
  std::size_t in_ch = 1;
  for (std::size_t s = 0; s < cfg.stages(); ++s) {
    const std::size_t out_ch = cfg.conv_channels[s];
    he_uniform(conv_weight_name(s), {out_ch, in_ch, 3, 3}, in_ch * 9);
    zeros(conv_bias_name(s), out_ch);
    in_ch = out_ch;
  }
  he_uniform(std::string(kDenseWeight), {cfg.embedding_dim, in_ch}, in_ch);
  zeros(std::string(kDenseBias), cfg.embedding_dim);
  return params;
}

EncoderConfig infer_config(const ParameterSet& params, std::size_t freq,
                           std::size_t frames) {
  require(params.tensors.size() >= 4 && params.tensors.size() % 2 == 0,
          "parameter set does not describe an encoder");
  EncoderConfig cfg;
  cfg.input_freq = freq;
  cfg.input_frames = frames;
  cfg.conv_channels.clear();
  const std::size_t stages = params.tensors.size() / 2 - 1;
  for (std::size_t s = 0; s < stages; ++s) {
    const auto& w = params.tensors[weight_index(s)];
    require(w.shape.size() == 4, "conv weight must be rank 4");
    cfg.conv_channels.push_back(w.shape[0]);
  }
  const auto& dw = params.tensors[2 * stages];
  require(dw.shape.size() == 2, "dense weight must be rank 2");
  cfg.embedding_dim = dw.shape[0];
  cfg.validate();
  check_layout(cfg, params);
  return cfg;
}

template <typename T>
std::vector<T> encoder_forward(const EncoderConfig& cfg,
                               const BasicParameterSet<T>& params,
                               const Spectrogram& spec, ForwardCache<T>* cache) {
  if (spec.freq_bins != cfg.input_freq || spec.frames != cfg.input_frames) {
    fail(ErrorKind::kInvalidArgument,
         "spectrogram shape mismatch: expected " + std::to_string(cfg.input_freq) +
             "x" + std::to_string(cfg.input_frames) + ", got " +
             std::to_string(spec.freq_bins) + "x" + std::to_string(spec.frames));
  }
  ForwardCache<T> local;
  ForwardCache<T>& fc = cache ? *cache : local;
  fc.stages.resize(cfg.stages());

  std::vector<T> input(spec.data.begin(), spec.data.end());
  std::size_t in_ch = 1;
  std::size_t h = cfg.input_freq;
  std::size_t w = cfg.input_frames;
  for (std::size_t s = 0; s < cfg.stages(); ++s) {
    auto& st = fc.stages[s];
    st.in_ch = in_ch;
    st.out_ch = cfg.conv_channels[s];
    st.height = h;
    st.width = w;
    const std::size_t hw = h * w;
    const std::size_t k = in_ch * 9;
    st.cols.resize(k * hw);
    im2col3x3(input.data(), in_ch, h, w, st.cols.data());

    st.act.resize(st.out_ch * hw);
    ConstMatMap<T> wmat(params.tensors[weight_index(s)].values.data(),
                        static_cast<Eigen::Index>(st.out_ch), static_cast<Eigen::Index>(k));
    ConstMatMap<T> cols(st.cols.data(), static_cast<Eigen::Index>(k),
                        static_cast<Eigen::Index>(hw));
    MatMap<T> act(st.act.data(), static_cast<Eigen::Index>(st.out_ch),
                  static_cast<Eigen::Index>(hw));
    act.noalias() = wmat * cols;
    const auto& bias = params.tensors[bias_index(s)].values;
    for (std::size_t c = 0; c < st.out_ch; ++c) {
      T* row = st.act.data() + c * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const T v = row[i] + bias[c];
        row[i] = v > T{0} ? v : T{0};
      }
    }

    st.pooled_h = h / 2;
    st.pooled_w = w / 2;
    const std::size_t phw = st.pooled_h * st.pooled_w;
    st.argmax.resize(st.out_ch * phw);
    input.assign(st.out_ch * phw, T{0});
    for (std::size_t c = 0; c < st.out_ch; ++c) {
      const T* plane = st.act.data() + c * hw;
      for (std::size_t py = 0; py < st.pooled_h; ++py) {
        for (std::size_t px = 0; px < st.pooled_w; ++px) {
          std::size_t best = (2 * py) * w + 2 * px;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = (2 * py + dy) * w + 2 * px + dx;
              if (plane[idx] > plane[best]) best = idx;
            }
          }
          const std::size_t out_idx = c * phw + py * st.pooled_w + px;
          st.argmax[out_idx] = static_cast<std::uint32_t>(c * hw + best);
          input[out_idx] = plane[best];
        }
      }
    }
    in_ch = st.out_ch;
    h = st.pooled_h;
    w = st.pooled_w;
  }
  fc.pooled = input;

  const std::size_t hw = h * w;
  fc.gap.assign(in_ch, T{0});
  for (std::size_t c = 0; c < in_ch; ++c) {
    T acc{0};
    for (std::size_t i = 0; i < hw; ++i) acc += input[c * hw + i];
    fc.gap[c] = acc / static_cast<T>(hw);
  }

  const auto& dw = params.tensors[2 * cfg.stages()].values;
  const auto& db = params.tensors[2 * cfg.stages() + 1].values;
  fc.pre.assign(cfg.embedding_dim, T{0});
  T sq{0};
  for (std::size_t d = 0; d < cfg.embedding_dim; ++d) {
    T acc = db[d];
    for (std::size_t c = 0; c < in_ch; ++c) acc += dw[d * in_ch + c] * fc.gap[c];
    fc.pre[d] = acc;
    sq += acc * acc;
  }
  fc.norm = std::sqrt(sq);
  if (!std::isfinite(static_cast<double>(fc.norm))) {
    fail(ErrorKind::kNumeric, "degenerate embedding: non-finite encoder output");
  }
  if (fc.norm == T{0}) {
    fail(ErrorKind::kNumeric, "degenerate embedding: zero pre-normalization vector");
  }
  fc.z.resize(cfg.embedding_dim);
  for (std::size_t d = 0; d < cfg.embedding_dim; ++d) fc.z[d] = fc.pre[d] / fc.norm;
  return fc.z;
}

template <typename T>
void encoder_backward(const EncoderConfig& cfg, const BasicParameterSet<T>& params,
                      const ForwardCache<T>& fc, std::span<const T> dz,
                      BasicParameterSet<T>& grads) {
  const std::size_t dim = cfg.embedding_dim;
  const std::size_t stages = cfg.stages();
  const std::size_t last_ch = cfg.conv_channels.back();

  // through z = pre / |pre|
  T zdot{0};
  for (std::size_t d = 0; d < dim; ++d) zdot += fc.z[d] * dz[d];
  std::vector<T> dpre(dim);
  for (std::size_t d = 0; d < dim; ++d) dpre[d] = (dz[d] - fc.z[d] * zdot) / fc.norm;

  const auto& dw = params.tensors[2 * stages].values;
  auto& gdw = grads.tensors[2 * stages].values;
  auto& gdb = grads.tensors[2 * stages + 1].values;
  std::vector<T> dgap(last_ch, T{0});
  for (std::size_t d = 0; d < dim; ++d) {
    gdb[d] += dpre[d];
    for (std::size_t c = 0; c < last_ch; ++c) {
      gdw[d * last_ch + c] += dpre[d] * fc.gap[c];
      dgap[c] += dw[d * last_ch + c] * dpre[d];
    }
  }

  const auto& last = fc.stages.back();
  const std::size_t phw = last.pooled_h * last.pooled_w;
  std::vector<T> dpooled(last_ch * phw);
  for (std::size_t c = 0; c < last_ch; ++c) {
    const T g = dgap[c] / static_cast<T>(phw);
    for (std::size_t i = 0; i < phw; ++i) dpooled[c * phw + i] = g;
  }

  std::vector<T> dact;
  std::vector<T> dcols;
  for (std::size_t s = stages; s-- > 0;) {
    const auto& st = fc.stages[s];
    const std::size_t hw = st.height * st.width;
    const std::size_t k = st.in_ch * 9;
    dact.assign(st.out_ch * hw, T{0});
    for (std::size_t i = 0; i < st.argmax.size(); ++i) dact[st.argmax[i]] += dpooled[i];
    for (std::size_t i = 0; i < dact.size(); ++i) {
      if (!(st.act[i] > T{0})) dact[i] = T{0};
    }

    ConstMatMap<T> dmat(dact.data(), static_cast<Eigen::Index>(st.out_ch),
                        static_cast<Eigen::Index>(hw));
    ConstMatMap<T> cols(st.cols.data(), static_cast<Eigen::Index>(k),
                        static_cast<Eigen::Index>(hw));
    MatMap<T> gw(grads.tensors[weight_index(s)].values.data(),
                 static_cast<Eigen::Index>(st.out_ch), static_cast<Eigen::Index>(k));
    gw.noalias() += dmat * cols.transpose();
    auto& gb = grads.tensors[bias_index(s)].values;
    for (std::size_t c = 0; c < st.out_ch; ++c) {
      T acc{0};
      for (std::size_t i = 0; i < hw; ++i) acc += dact[c * hw + i];
      gb[c] += acc;
    }

    if (s == 0) break;
    ConstMatMap<T> wmat(params.tensors[weight_index(s)].values.data(),
                        static_cast<Eigen::Index>(st.out_ch), static_cast<Eigen::Index>(k));
    dcols.resize(k * hw);
    MatMap<T> dc(dcols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
    dc.noalias() = wmat.transpose() * dmat;
    dpooled.resize(st.in_ch * hw);
    col2im3x3(dcols.data(), st.in_ch, st.height, st.width, dpooled.data());
  }
}

template std::vector<float> encoder_forward<float>(const EncoderConfig&,
                                                   const BasicParameterSet<float>&,
                                                   const Spectrogram&, ForwardCache<float>*);
template std::vector<double> encoder_forward<double>(const EncoderConfig&,
                                                     const BasicParameterSet<double>&,
                                                     const Spectrogram&,
                                                     ForwardCache<double>*);
template void encoder_backward<float>(const EncoderConfig&, const BasicParameterSet<float>&,
                                      const ForwardCache<float>&, std::span<const float>,
                                      BasicParameterSet<float>&);
template void encoder_backward<double>(const EncoderConfig&,
                                       const BasicParameterSet<double>&,
                                       const ForwardCache<double>&, std::span<const double>,
                                       BasicParameterSet<double>&);

Embedding forward(const Model& model, const Spectrogram& spec) {
  check_layout(model.config, model.params);
  return Embedding{encoder_forward<float>(model.config, model.params, spec, nullptr)};
}

std::vector<Embedding> forward_batch(const Model& model,
                                     std::span<const Spectrogram> specs) {
  check_layout(model.config, model.params);
  std::vector<Embedding> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      out.push_back(Embedding{encoder_forward<float>(model.config, model.params, specs[i], nullptr)});
    } catch (const Error& e) {
      fail(e.kind(), "batch element " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gaitgate

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "bobnet/errors.hpp"
#include "bobnet/io_util.hpp"
#include "bobnet/nn.hpp"
#include "bobnet/optimizer.hpp"

namespace bobnet {

enum class LayerKind { Conv3x3, Relu, MaxPool2x2, Spp, FullyConnected, Dropout, PairedSoftmax };

struct LayerSpec {
  LayerKind kind;
  std::size_t in_units = 0;   // conv: input channels; fc: input units
  std::size_t out_units = 0;  // conv: kernel count; fc: output units
};

// Exact channel-width fraction; 1/4 and 1/8 nets keep gradient checks and CI
// training tractable, 1/1 is the full architecture.
struct Rational {
  std::uint32_t num = 1;
  std::uint32_t den = 1;
  bool operator==(const Rational&) const = default;
};

// The bounding-box network: eight 3x3 conv layers of widths
// scale*(16,32,64,64,128,128,128,128), 2x2 max-pooling after convs 1/2/4/6,
// spatial pyramid pooling after conv 8, two scale*128 fully-connected layers
// (each ReLU + dropout), and a 2N-unit output under a paired softmax.
struct ModelSpec {
  std::uint32_t num_structures = 1;
  Rational channel_scale{1, 1};
  std::vector<LayerSpec> layers;

  static ModelSpec bobnet(std::uint32_t num_structures, Rational channel_scale = {1, 1}) {
    if (num_structures < 1) throw std::invalid_argument("bobnet: structure count must be >= 1");
    if (channel_scale.num == 0 || channel_scale.den == 0)
      throw std::invalid_argument("bobnet: channel_scale must be a positive rational");
    auto scaled = [&](std::size_t base) {
      const std::size_t v = base * channel_scale.num;
      if (v % channel_scale.den != 0 || v / channel_scale.den == 0)
        throw std::invalid_argument("bobnet: channel_scale does not yield integer layer widths");
      return v / channel_scale.den;
    };

    constexpr std::size_t conv_widths[8] = {16, 32, 64, 64, 128, 128, 128, 128};
    constexpr bool pool_after[8] = {true, true, false, true, false, true, false, false};

    ModelSpec spec;
    spec.num_structures = num_structures;
    spec.channel_scale = channel_scale;
    std::size_t channels = 1;
    for (std::size_t i = 0; i < 8; ++i) {
      const std::size_t width = scaled(conv_widths[i]);
      spec.layers.push_back({LayerKind::Conv3x3, channels, width});
      spec.layers.push_back({LayerKind::Relu});
      if (pool_after[i]) spec.layers.push_back({LayerKind::MaxPool2x2});
      channels = width;
    }
    spec.layers.push_back({LayerKind::Spp});
    const std::size_t fc_width = scaled(128);
    std::size_t units = channels * nn::kSppBinsPerChannel;
    for (int i = 0; i < 2; ++i) {
      spec.layers.push_back({LayerKind::FullyConnected, units, fc_width});
      spec.layers.push_back({LayerKind::Relu});
      spec.layers.push_back({LayerKind::Dropout});
      units = fc_width;
    }
    spec.layers.push_back({LayerKind::FullyConnected, units, 2 * static_cast<std::size_t>(num_structures)});
    spec.layers.push_back({LayerKind::PairedSoftmax});
    return spec;
  }
};

template <typename T>
struct Param {
  Tensor<T> weights;
  Tensor<T> biases;
  Tensor<T> vel_w;  // Nesterov velocity, mirrors weights
  Tensor<T> vel_b;
};

template <typename T>
using ParameterSet = std::vector<Param<T>>;

template <typename T>
struct Gradients {
  std::vector<Tensor<T>> w;
  std::vector<Tensor<T>> b;
  void zero() {
    for (auto& t : w) t.fill(T(0));
    for (auto& t : b) t.fill(T(0));
  }
};

// Per-sample activation cache; reused across samples to amortize allocation.
template <typename T>
struct ForwardCache {
  bool valid = false;
  std::vector<Tensor<T>> acts;                       // acts[i] = input of layer i; back() = probs
  std::vector<std::vector<std::uint8_t>> relu_mask;  // per relu layer
  std::vector<std::vector<std::size_t>> argmax;      // per pool/spp layer
  std::vector<std::vector<T>> drop_mask;             // per dropout layer
  nn::ConvWorkspace<T> ws;
};

template <typename T>
class BobNet {
 public:
  BobNet(ModelSpec spec, Rng& rng) : spec_(std::move(spec)) {
    for (const auto& layer : spec_.layers) {
      if (layer.kind == LayerKind::Conv3x3) {
        Param<T> p;
        p.weights = glorot_uniform_init<T>({layer.out_units, layer.in_units, 3, 3}, rng);
        p.biases = Tensor<T>({layer.out_units});
        p.vel_w = Tensor<T>(p.weights.shape);
        p.vel_b = Tensor<T>(p.biases.shape);
        params_.push_back(std::move(p));
      } else if (layer.kind == LayerKind::FullyConnected) {
        Param<T> p;
        p.weights = glorot_uniform_init<T>({layer.out_units, layer.in_units}, rng);
        p.biases = Tensor<T>({layer.out_units});
        p.vel_w = Tensor<T>(p.weights.shape);
        p.vel_b = Tensor<T>(p.biases.shape);
        params_.push_back(std::move(p));
      }
    }
  }

  const ModelSpec& spec() const { return spec_; }
  std::uint32_t num_structures() const { return spec_.num_structures; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.weights.numel() + p.biases.numel();
    return n;
  }

  Gradients<T> zero_gradients() const {
    Gradients<T> g;
    for (const auto& p : params_) {
      g.w.emplace_back(p.weights.shape);
      g.b.emplace_back(p.biases.shape);
    }
    return g;
  }

  // Runs one [1,H,W] slice through the network, retaining everything backward
  // needs. Returns the paired-softmax probabilities (length 2N).
  const Tensor<T>& forward(const Tensor<T>& image, ForwardCache<T>& cache, bool training = false,
                           double dropout_rate = 0.0, Rng* rng = nullptr) const {
    if (image.rank() != 3 || image.dim(0) != 1)
      throw std::invalid_argument("forward: input must be a single-channel [1,H,W] slice");
    const std::size_t n_layers = spec_.layers.size();
    cache.acts.resize(n_layers + 1);
    cache.relu_mask.resize(n_layers);
    cache.argmax.resize(n_layers);
    cache.drop_mask.resize(n_layers);
    cache.acts[0] = image;
    std::size_t param_idx = 0;
    for (std::size_t i = 0; i < n_layers; ++i) {
      const auto& layer = spec_.layers[i];
      const Tensor<T>& x = cache.acts[i];
      switch (layer.kind) {
        case LayerKind::Conv3x3:
          cache.acts[i + 1] =
              nn::conv3x3_forward(x, params_[param_idx].weights, params_[param_idx].biases, &cache.ws);
          ++param_idx;
          break;
        case LayerKind::Relu:
          cache.acts[i + 1] = nn::relu_forward(x, &cache.relu_mask[i]);
          break;
        case LayerKind::MaxPool2x2:
          cache.acts[i + 1] = nn::maxpool2x2_forward(x, &cache.argmax[i]);
          break;
        case LayerKind::Spp:
          cache.acts[i + 1] = nn::spp_forward(x, &cache.argmax[i]);
          break;
        case LayerKind::FullyConnected:
          cache.acts[i + 1] = nn::fc_forward(x, params_[param_idx].weights, params_[param_idx].biases);
          ++param_idx;
          break;
        case LayerKind::Dropout: {
          Rng dummy(0);
          cache.acts[i + 1] =
              nn::dropout_apply(x, training ? dropout_rate : 0.0, rng ? *rng : dummy, training, &cache.drop_mask[i]);
          break;
        }
        case LayerKind::PairedSoftmax:
          cache.acts[i + 1] = nn::paired_softmax(x);
          break;
      }
    }
    cache.valid = true;
    return cache.acts[n_layers];
  }

  // Accumulates d(sample cross-entropy)/d(parameters) into grads and returns
  // the sample loss. Requires a prior forward on the same cache.
  T backward(ForwardCache<T>& cache, const std::vector<std::uint8_t>& labels, Gradients<T>& grads) const {
    if (!cache.valid) throw std::logic_error("backward called before forward");
    const std::size_t n_layers = spec_.layers.size();
    const Tensor<T>& probs = cache.acts[n_layers];
    const T loss = nn::cross_entropy_paired(probs, labels);

    // paired softmax + cross-entropy collapse to probs - onehot
    Tensor<T> grad = nn::paired_softmax_ce_grad(probs, labels);
    std::size_t param_idx = params_.size();
    for (std::size_t i = n_layers; i-- > 0;) {
      const auto& layer = spec_.layers[i];
      const Tensor<T>& x = cache.acts[i];
      switch (layer.kind) {
        case LayerKind::PairedSoftmax:
          break;  // folded into the initial gradient
        case LayerKind::Dropout:
          grad = nn::dropout_backward(grad, cache.drop_mask[i]);
          break;
        case LayerKind::FullyConnected: {
          --param_idx;
          Tensor<T> gx;
          nn::fc_backward(x, params_[param_idx].weights, grad, gx, grads.w[param_idx], grads.b[param_idx]);
          grad = std::move(gx);
          break;
        }
        case LayerKind::Spp:
          grad = nn::spp_backward(grad, cache.argmax[i], x.shape);
          break;
        case LayerKind::MaxPool2x2:
          grad = nn::maxpool2x2_backward(grad, cache.argmax[i], x.shape);
          break;
        case LayerKind::Relu:
          grad = nn::relu_backward(grad, cache.relu_mask[i]);
          break;
        case LayerKind::Conv3x3: {
          --param_idx;
          Tensor<T> gx;
          nn::conv3x3_backward(x, params_[param_idx].weights, grad, gx, grads.w[param_idx], grads.b[param_idx],
                               &cache.ws);
          grad = std::move(gx);
          break;
        }
      }
    }
    return loss;
  }

  // Gradient of the training objective for one minibatch: mean cross-entropy
  // over the batch plus l2_weight * sum of squared weights (biases excluded).
  // batch is [B,1,H,W]; labels one boolean vector per sample.
  T batch_gradients(const Tensor<T>& batch, const std::vector<std::vector<std::uint8_t>>& labels,
                    double l2_weight, double dropout_rate, Rng* rng, Gradients<T>& grads,
                    ForwardCache<T>* cache = nullptr) const {
    if (batch.rank() != 4 || batch.dim(1) != 1)
      throw std::invalid_argument("batch_gradients: batch must be [B,1,H,W]");
    const std::size_t b = batch.dim(0), h = batch.dim(2), w = batch.dim(3);
    if (labels.size() != b) throw std::invalid_argument("batch_gradients: one label vector per sample required");
    grads.zero();
    ForwardCache<T> local;
    ForwardCache<T>& cc = cache ? *cache : local;
    T total = T(0);
    Tensor<T> sample({1, h, w});
    for (std::size_t s = 0; s < b; ++s) {
      std::copy_n(batch.ptr() + s * h * w, h * w, sample.ptr());
      forward(sample, cc, true, dropout_rate, rng);
      total += backward(cc, labels[s], grads);
    }
    const T inv_b = T(1) / static_cast<T>(b);
    for (auto& t : grads.w) {
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] *= inv_b;
    }
    for (auto& t : grads.b) {
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] *= inv_b;
    }
    T penalty = T(0);
    if (l2_weight != 0.0) {
      const T lambda = static_cast<T>(l2_weight);
      for (std::size_t p = 0; p < params_.size(); ++p) {
        const Tensor<T>& wt = params_[p].weights;
        Tensor<T>& gw = grads.w[p];
        for (std::size_t i = 0; i < wt.numel(); ++i) {
          penalty += lambda * wt[i] * wt[i];
          gw[i] += T(2) * lambda * wt[i];
        }
      }
    }
    return total * inv_b + penalty;
  }

  // Objective value only (finite-difference harness).
  T batch_loss(const Tensor<T>& batch, const std::vector<std::vector<std::uint8_t>>& labels,
               double l2_weight) const {
    const std::size_t b = batch.dim(0), h = batch.dim(2), w = batch.dim(3);
    ForwardCache<T> cc;
    T total = T(0);
    Tensor<T> sample({1, h, w});
    for (std::size_t s = 0; s < b; ++s) {
      std::copy_n(batch.ptr() + s * h * w, h * w, sample.ptr());
      const Tensor<T>& probs = forward(sample, cc, false, 0.0, nullptr);
      total += nn::cross_entropy_paired(probs, labels[s]);
    }
    T penalty = T(0);
    if (l2_weight != 0.0) {
      const T lambda = static_cast<T>(l2_weight);
      for (const auto& p : params_)
        for (std::size_t i = 0; i < p.weights.numel(); ++i) penalty += lambda * p.weights[i] * p.weights[i];
    }
    return total / static_cast<T>(b) + penalty;
  }

  // Nesterov update on every parameter tensor.
  void apply_step(const Gradients<T>& grads, double lr, double momentum) {
    for (std::size_t p = 0; p < params_.size(); ++p) {
      nesterov_step(params_[p].weights, params_[p].vel_w, grads.w[p], lr, momentum);
      nesterov_step(params_[p].biases, params_[p].vel_b, grads.b[p], lr, momentum);
    }
  }

  // Inference on one slice: presence probability per structure.
  // Slices below 64x64 must be padded by the caller first.
  std::vector<T> predict_slice(const Tensor<T>& image) const {
    if (image.rank() != 3 || image.dim(0) != 1)
      throw std::invalid_argument("predict_slice: input must be [1,H,W]");
    if (image.dim(1) < 64 || image.dim(2) < 64)
      throw std::invalid_argument("predict_slice: slice must be at least 64x64; pad smaller slices");
    ForwardCache<T> cache;
    const Tensor<T>& probs = forward(image, cache, false, 0.0, nullptr);
    std::vector<T> presence(spec_.num_structures);
    for (std::size_t n = 0; n < presence.size(); ++n) presence[n] = probs[2 * n];
    return presence;
  }

  // Checkpoint layout: "BOBN", u32 version, u32 N, u32 scale numerator,
  // u32 scale denominator, u32 parameterized-layer count, then per layer the
  // weight and bias tensors as u32 rank, u32 extents, raw f32 LE data.
  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
    os.write("BOBN", 4);
    io::write_u32le(os, kCheckpointVersion);
    io::write_u32le(os, spec_.num_structures);
    io::write_u32le(os, spec_.channel_scale.num);
    io::write_u32le(os, spec_.channel_scale.den);
    io::write_u32le(os, static_cast<std::uint32_t>(params_.size()));
    for (const auto& p : params_) {
      write_tensor(os, p.weights);
      write_tensor(os, p.biases);
    }
    if (!os) throw FormatError("failed writing checkpoint: " + path.string());
  }

  static BobNet<T> load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint: " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "BOBN")
      throw FormatError("not a BOBN checkpoint: " + path.string());
    const std::uint32_t version = io::read_u32le(is);
    if (version != kCheckpointVersion)
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t n = io::read_u32le(is);
    const std::uint32_t num = io::read_u32le(is);
    const std::uint32_t den = io::read_u32le(is);
    const std::uint32_t layer_count = io::read_u32le(is);

    Rng rng(0);
    BobNet<T> model(ModelSpec::bobnet(n, Rational{num, den}), rng);
    if (layer_count != model.params_.size())
      throw FormatError("checkpoint layer count does not match architecture");
    for (auto& p : model.params_) {
      read_tensor_into(is, p.weights);
      read_tensor_into(is, p.biases);
      p.vel_w.fill(T(0));
      p.vel_b.fill(T(0));
    }
    if (is.peek() != std::char_traits<char>::eof())
      throw FormatError("trailing bytes after checkpoint payload");
    return model;
  }

  static constexpr std::uint32_t kCheckpointVersion = 1;

 private:
  static void write_tensor(std::ostream& os, const Tensor<T>& t) {
    io::write_u32le(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape) io::write_u32le(os, static_cast<std::uint32_t>(e));
    if constexpr (std::is_same_v<T, float>) {
      io::write_f32le_array(os, t.ptr(), t.numel());
    } else {
      for (std::size_t i = 0; i < t.numel(); ++i) io::write_f32le(os, static_cast<float>(t[i]));
    }
  }

  static void read_tensor_into(std::istream& is, Tensor<T>& t) {
    const std::uint32_t rank = io::read_u32le(is);
    if (rank != t.rank()) throw FormatError("checkpoint tensor rank does not match architecture");
    for (std::size_t d = 0; d < rank; ++d) {
      if (io::read_u32le(is) != t.dim(d)) throw FormatError("checkpoint tensor extent does not match architecture");
    }
    if constexpr (std::is_same_v<T, float>) {
      io::read_f32le_array(is, t.ptr(), t.numel());
    } else {
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(io::read_f32le(is));
    }
  }

  ModelSpec spec_;
  ParameterSet<T> params_;
};

}  // namespace bobnet

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bobnet/rng.hpp"
#include "bobnet/tensor.hpp"

// Layer primitives with analytic gradients. Feature maps are [C,H,W],
// conv kernels [C_out,C_in,3,3], fully-connected weights [out,in].
// Convolutions are cross-correlations (no kernel flip); learned weights make
// the orientation unobservable.
namespace bobnet::nn {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Scratch space reused across conv calls to avoid per-call allocation.
template <typename T>
struct ConvWorkspace {
  std::vector<T> cols;      // im2col buffer, [9*C_in x H*W] column-major
  std::vector<T> grad_cols; // same layout, backward
};

namespace detail {

// Unrolls 3x3 zero-padded patches: cols(k, p) with k = (ci*3+dy)*3+dx and
// p = y*W + x, stored column-major so each output pixel's patch is contiguous.
template <typename T>
void im2col_3x3(const T* in, std::size_t c_in, std::size_t h, std::size_t w, std::vector<T>& cols) {
  const std::size_t k = 9 * c_in;
  cols.assign(k * h * w, T(0));
  for (std::size_t ci = 0; ci < c_in; ++ci) {
    const T* chan = in + ci * h * w;
    for (std::size_t dy = 0; dy < 3; ++dy) {
      for (std::size_t dx = 0; dx < 3; ++dx) {
        const std::size_t row = (ci * 3 + dy) * 3 + dx;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + dy) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const T* src = chan + static_cast<std::size_t>(sy) * w;
          T* dst = cols.data() + row; // stride k per output pixel
          const std::size_t base = y * w;
          // valid x range for this dx: x+dx-1 in [0, w)
          const std::size_t x0 = (dx == 0) ? 1 : 0;
          const std::size_t x1 = (dx == 2) ? w - 1 : w;
          for (std::size_t x = x0; x < x1; ++x) {
            dst[(base + x) * k] = src[x + dx - 1];
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-adds column gradients back into the image.
template <typename T>
void col2im_3x3(const std::vector<T>& cols, std::size_t c_in, std::size_t h, std::size_t w, T* out) {
  const std::size_t k = 9 * c_in;
  std::fill(out, out + c_in * h * w, T(0));
  for (std::size_t ci = 0; ci < c_in; ++ci) {
    T* chan = out + ci * h * w;
    for (std::size_t dy = 0; dy < 3; ++dy) {
      for (std::size_t dx = 0; dx < 3; ++dx) {
        const std::size_t row = (ci * 3 + dy) * 3 + dx;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + dy) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          T* dst = chan + static_cast<std::size_t>(sy) * w;
          const T* src = cols.data() + row;
          const std::size_t base = y * w;
          const std::size_t x0 = (dx == 0) ? 1 : 0;
          const std::size_t x1 = (dx == 2) ? w - 1 : w;
          for (std::size_t x = x0; x < x1; ++x) {
            dst[x + dx - 1] += src[(base + x) * k];
          }
        }
      }
    }
  }
}

// SPP bin edges for one axis: bin r of grid n covers [floor(r*e/n), ceil((r+1)*e/n)).
inline std::size_t spp_lo(std::size_t r, std::size_t extent, std::size_t n) { return r * extent / n; }
inline std::size_t spp_hi(std::size_t r, std::size_t extent, std::size_t n) {
  return ((r + 1) * extent + n - 1) / n;
}

}  // namespace detail

// Zero-padded "same" 3x3 convolution: output spatial size equals input size.
template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& biases,
                          ConvWorkspace<T>* ws = nullptr) {
  if (input.rank() != 3) throw std::invalid_argument("conv3x3: input must be [C,H,W]");
  if (weights.rank() != 4 || weights.dim(2) != 3 || weights.dim(3) != 3)
    throw std::invalid_argument("conv3x3: weights must be [C_out,C_in,3,3]");
  if (input.dim(0) != weights.dim(1))
    throw std::invalid_argument("conv3x3: input channel count does not match weight channels");
  const std::size_t c_out = weights.dim(0), c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (biases.numel() != c_out) throw std::invalid_argument("conv3x3: bias length must equal C_out");
  if (h < 3 || w < 3) throw std::invalid_argument("conv3x3: spatial extent must be at least 3x3");

  ConvWorkspace<T> local;
  ConvWorkspace<T>& work = ws ? *ws : local;
  detail::im2col_3x3(input.ptr(), c_in, h, w, work.cols);

  Tensor<T> out({c_out, h, w});
  const std::size_t k = 9 * c_in, p = h * w;
  Eigen::Map<const MatRM<T>> wmat(weights.ptr(), c_out, k);
  Eigen::Map<const MatCM<T>> cols(work.cols.data(), k, p);
  Eigen::Map<MatRM<T>> omat(out.ptr(), c_out, p);
  omat.noalias() = wmat * cols;
  for (std::size_t co = 0; co < c_out; ++co) omat.row(co).array() += biases[co];
  return out;
}

// Accumulates dL/dW and dL/db, writes dL/dinput.
template <typename T>
void conv3x3_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_out,
                      Tensor<T>& grad_input, Tensor<T>& grad_weights, Tensor<T>& grad_biases,
                      ConvWorkspace<T>* ws = nullptr) {
  const std::size_t c_out = weights.dim(0), c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t k = 9 * c_in, p = h * w;

  ConvWorkspace<T> local;
  ConvWorkspace<T>& work = ws ? *ws : local;
  detail::im2col_3x3(input.ptr(), c_in, h, w, work.cols);

  Eigen::Map<const MatRM<T>> gout(grad_out.ptr(), c_out, p);
  Eigen::Map<const MatCM<T>> cols(work.cols.data(), k, p);
  Eigen::Map<MatRM<T>> gw(grad_weights.ptr(), c_out, k);
  gw.noalias() += gout * cols.transpose();
  for (std::size_t co = 0; co < c_out; ++co) grad_biases[co] += gout.row(co).sum();

  work.grad_cols.resize(k * p);
  Eigen::Map<const MatRM<T>> wmat(weights.ptr(), c_out, k);
  Eigen::Map<MatCM<T>> gcols(work.grad_cols.data(), k, p);
  gcols.noalias() = wmat.transpose() * gout;

  grad_input = Tensor<T>({c_in, h, w});
  detail::col2im_3x3(work.grad_cols, c_in, h, w, grad_input.ptr());
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input, std::vector<std::uint8_t>* mask = nullptr) {
  Tensor<T> out = input;
  if (mask) mask->assign(input.numel(), 0);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (out[i] > T(0)) {
      if (mask) (*mask)[i] = 1;
    } else {
      out[i] = T(0);
    }
  }
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& mask) {
  Tensor<T> grad = grad_out;
  for (std::size_t i = 0; i < grad.numel(); ++i)
    if (!mask[i]) grad[i] = T(0);
  return grad;
}

// Non-overlapping 2x2 window max; odd trailing row/column dropped.
// argmax receives the flat input index of each window winner.
template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& input, std::vector<std::size_t>* argmax = nullptr) {
  if (input.rank() != 3) throw std::invalid_argument("maxpool2x2: input must be [C,H,W]");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h < 2 || w < 2) throw std::invalid_argument("maxpool2x2: spatial extent must be at least 2x2");
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> out({c, oh, ow});
  if (argmax) argmax->assign(c * oh * ow, 0);
  for (std::size_t ci = 0; ci < c; ++ci) {
    const T* chan = input.ptr() + ci * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (2 * y) * w + 2 * x;
        T bv = chan[best];
        const std::size_t cand[3] = {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x, (2 * y + 1) * w + 2 * x + 1};
        for (std::size_t idx : cand) {
          if (chan[idx] > bv) {
            bv = chan[idx];
            best = idx;
          }
        }
        out.at(ci, y, x) = bv;
        if (argmax) (*argmax)[(ci * oh + y) * ow + x] = ci * h * w + best;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                              const std::vector<std::size_t>& input_shape) {
  Tensor<T> grad(input_shape);
  for (std::size_t i = 0; i < grad_out.numel(); ++i) grad[argmax[i]] += grad_out[i];
  return grad;
}

// Spatial pyramid pooling with 4x4, 2x2 and 1x1 max grids: 21 values per
// channel whatever the input size. Output is channel-major, each channel's
// bins ordered grid-4 row-major, then grid-2, then grid-1. Bins of a grid may
// overlap when the extent is not divisible by the grid size.
inline constexpr std::size_t kSppBinsPerChannel = 21;
inline constexpr std::size_t spp_grids[3] = {4, 2, 1};

template <typename T>
Tensor<T> spp_forward(const Tensor<T>& input, std::vector<std::size_t>* argmax = nullptr) {
  if (input.rank() != 3) throw std::invalid_argument("spp: input must be [C,H,W]");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h < 4 || w < 4) throw std::invalid_argument("spp: spatial extent must be at least 4x4");
  Tensor<T> out({c * kSppBinsPerChannel});
  if (argmax) argmax->assign(out.numel(), 0);
  std::size_t o = 0;
  for (std::size_t ci = 0; ci < c; ++ci) {
    const T* chan = input.ptr() + ci * h * w;
    for (std::size_t n : spp_grids) {
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t r0 = detail::spp_lo(r, h, n), r1 = detail::spp_hi(r, h, n);
        for (std::size_t s = 0; s < n; ++s) {
          const std::size_t s0 = detail::spp_lo(s, w, n), s1 = detail::spp_hi(s, w, n);
          std::size_t best = r0 * w + s0;
          T bv = chan[best];
          for (std::size_t y = r0; y < r1; ++y) {
            for (std::size_t x = s0; x < s1; ++x) {
              if (chan[y * w + x] > bv) {
                bv = chan[y * w + x];
                best = y * w + x;
              }
            }
          }
          out[o] = bv;
          if (argmax) (*argmax)[o] = ci * h * w + best;
          ++o;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> spp_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                       const std::vector<std::size_t>& input_shape) {
  Tensor<T> grad(input_shape);
  // bins can overlap, so gradients add
  for (std::size_t i = 0; i < grad_out.numel(); ++i) grad[argmax[i]] += grad_out[i];
  return grad;
}

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& biases) {
  if (weights.rank() != 2) throw std::invalid_argument("fc: weights must be [out,in]");
  const std::size_t out_n = weights.dim(0), in_n = weights.dim(1);
  if (input.numel() != in_n) throw std::invalid_argument("fc: input length does not match weight columns");
  if (biases.numel() != out_n) throw std::invalid_argument("fc: bias length must equal output units");
  Tensor<T> out({out_n});
  Eigen::Map<const MatRM<T>> wmat(weights.ptr(), out_n, in_n);
  Eigen::Map<const Vec<T>> x(input.ptr(), in_n);
  Eigen::Map<Vec<T>> y(out.ptr(), out_n);
  y.noalias() = wmat * x;
  Eigen::Map<const Vec<T>> b(biases.ptr(), out_n);
  y += b;
  return out;
}

template <typename T>
void fc_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_out,
                 Tensor<T>& grad_input, Tensor<T>& grad_weights, Tensor<T>& grad_biases) {
  const std::size_t out_n = weights.dim(0), in_n = weights.dim(1);
  Eigen::Map<const MatRM<T>> wmat(weights.ptr(), out_n, in_n);
  Eigen::Map<const Vec<T>> x(input.ptr(), in_n);
  Eigen::Map<const Vec<T>> gy(grad_out.ptr(), out_n);
  Eigen::Map<MatRM<T>> gw(grad_weights.ptr(), out_n, in_n);
  gw.noalias() += gy * x.transpose();
  Eigen::Map<Vec<T>> gb(grad_biases.ptr(), out_n);
  gb += gy;
  grad_input = Tensor<T>({in_n});
  Eigen::Map<Vec<T>> gx(grad_input.ptr(), in_n);
  gx.noalias() = wmat.transpose() * gy;
}

// Inverted dropout: surviving units scale by 1/(1-rate) in training so
// inference is the identity. mask stores the per-unit multiplier.
template <typename T>
Tensor<T> dropout_apply(const Tensor<T>& input, double rate, Rng& rng, bool training,
                        std::vector<T>* mask = nullptr) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) {
    if (mask) mask->assign(input.numel(), T(1));
    return input;
  }
  Tensor<T> out = input;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  if (mask) mask->assign(input.numel(), T(0));
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (rng.uniform() < rate) {
      out[i] = T(0);
    } else {
      out[i] *= scale;
      if (mask) (*mask)[i] = scale;
    }
  }
  return out;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const std::vector<T>& mask) {
  Tensor<T> grad = grad_out;
  for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] *= mask[i];
  return grad;
}

// Softmax over consecutive pairs: entry 2n is the presence probability of
// structure n, entry 2n+1 its absence; each pair sums to 1 independently,
// which keeps multi-label prediction compatible with a softmax output.
template <typename T>
Tensor<T> paired_softmax(const Tensor<T>& logits) {
  if (logits.numel() == 0 || logits.numel() % 2 != 0)
    throw std::invalid_argument("paired_softmax: logit count must be even and positive");
  Tensor<T> probs = logits;
  for (std::size_t n = 0; n < logits.numel() / 2; ++n) {
    const T a = logits[2 * n], b = logits[2 * n + 1];
    const T m = std::max(a, b);
    const T ea = std::exp(a - m), eb = std::exp(b - m);
    probs[2 * n] = ea / (ea + eb);
    probs[2 * n + 1] = eb / (ea + eb);
  }
  return probs;
}

// Sum over structures of -log(selected probability); probabilities clamped to
// 1e-12 before the log so saturated pairs stay finite.
template <typename T>
T cross_entropy_paired(const Tensor<T>& probs, const std::vector<std::uint8_t>& labels) {
  if (probs.numel() != 2 * labels.size())
    throw std::invalid_argument("cross_entropy_paired: probs length must be twice the label count");
  T loss = T(0);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const T p = labels[n] ? probs[2 * n] : probs[2 * n + 1];
    loss -= std::log(std::max(p, static_cast<T>(1e-12)));
  }
  return loss;
}

// d(cross-entropy)/d(logits) through the paired softmax: p - y per pair.
template <typename T>
Tensor<T> paired_softmax_ce_grad(const Tensor<T>& probs, const std::vector<std::uint8_t>& labels) {
  Tensor<T> grad = probs;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n]) {
      grad[2 * n] -= T(1);
    } else {
      grad[2 * n + 1] -= T(1);
    }
  }
  return grad;
}

}  // namespace bobnet::nn

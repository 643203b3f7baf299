#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sbp/rng.hpp"
#include "sbp/tensor.hpp"

namespace sbp {

// Trainable tensor with its gradient and one optimizer accumulator (RMSProp
// second-moment estimate; unused by plain SGD). Gradient and accumulator are
// zero-initialized and always keep the value's shape.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor opt_state;
  bool frozen = false;

  Param() = default;
  Param(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Tensor::zeros(value.shape)),
        opt_state(Tensor::zeros(value.shape)) {}
};

using ParamRefs = std::vector<Param*>;

// ---------------------------------------------------------------------------
// Layers. forward() caches inputs for the matching backward(); backward()
// returns the input gradient and, unless told otherwise, accumulates into the
// parameter gradients.
// ---------------------------------------------------------------------------

struct Dense {
  Param w;  // [in, out]
  Param b;  // [out]
  bool has_bias = true;
  Tensor x_cache;

  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
        bool has_bias = true);

  std::size_t in_dim() const { return w.value.dim(0); }
  std::size_t out_dim() const { return w.value.dim(1); }

  Tensor forward(const Tensor& x);                  // [batch,in] -> [batch,out]
  Tensor backward(const Tensor& dy, bool accumulate_param_grads = true);
  Vec apply(const Vec& x) const;                    // cache-free single sample
};

// Stride-1, zero-padded, length-preserving 1-D convolution (ksize odd).
struct Conv1d {
  Param k;  // [out_ch, in_ch, ksize]
  Param b;  // [out_ch]
  bool has_bias = true;
  std::size_t ksize = 0;
  Tensor x_cache;

  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t in_ch, std::size_t out_ch,
         std::size_t ksize, Rng& rng, bool has_bias = true);

  std::size_t in_ch() const { return k.value.dim(1); }
  std::size_t out_ch() const { return k.value.dim(0); }

  Tensor forward(const Tensor& x);                  // [batch,ci,len] -> [batch,co,len]
  Tensor backward(const Tensor& dy, bool accumulate_param_grads = true);
  Tensor apply(const Tensor& x) const;              // cache-free
};

struct LeakyRelu {
  double slope = 0.2;
  Tensor x_cache;

  LeakyRelu() = default;
  explicit LeakyRelu(double s);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;
  Tensor apply(const Tensor& x) const;
};

// ---------------------------------------------------------------------------
// Classification primitives.
// ---------------------------------------------------------------------------

// Numerically stable softmax (max subtraction); output sums to 1 within 1e-12.
Vec softmax(const Vec& z);

// loss = -log softmax(z)[target]; gradient = softmax(z) - onehot(target).
struct CrossEntropyResult {
  double loss;
  Vec dloss_dz;
};
CrossEntropyResult cross_entropy(const Vec& z, std::size_t target);

// Mean cross-entropy over the rows of a [batch, M] logit tensor; the returned
// gradient is already divided by the batch size.
struct BatchCrossEntropyResult {
  double loss;
  Tensor dloss_dz;
};
BatchCrossEntropyResult mean_cross_entropy(const Tensor& z, const std::vector<std::size_t>& targets);

std::size_t argmax(const Vec& v);  // lowest index wins ties

// FNV-1a over parameter names, shapes, and raw value bytes, in list order.
std::uint64_t params_checksum(const ParamRefs& params);

}  // namespace sbp

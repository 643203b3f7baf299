#include "sbp/nn.hpp"

#include <algorithm>
#include <cmath>

#include "sbp/errors.hpp"

namespace sbp {

namespace {

Tensor init_weights(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

}  // namespace

Dense::Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
             bool with_bias)
    : w(name + ".w", init_weights({in, out}, in, rng)),
      b(name + ".b", Tensor::zeros({out})),
      has_bias(with_bias) {}

Tensor Dense::forward(const Tensor& x) {
  if (x.shape.size() != 2 || x.dim(1) != in_dim())
    throw ContractViolation("Dense::forward: input shape mismatch for " + w.name);
  x_cache = x;
  std::size_t batch = x.dim(0), in = in_dim(), out = out_dim();
  Tensor y = Tensor::zeros({batch, out});
  for (std::size_t i = 0; i < batch; ++i) {
    if (has_bias)
      for (std::size_t o = 0; o < out; ++o) y.at(i, o) = b.value.at(o);
    for (std::size_t j = 0; j < in; ++j) {
      double xv = x.at(i, j);
      for (std::size_t o = 0; o < out; ++o) y.at(i, o) += xv * w.value.at(j, o);
    }
  }
  return y;
}

Tensor Dense::backward(const Tensor& dy, bool accumulate_param_grads) {
  std::size_t batch = x_cache.dim(0), in = in_dim(), out = out_dim();
  if (dy.shape.size() != 2 || dy.dim(0) != batch || dy.dim(1) != out)
    throw ContractViolation("Dense::backward: gradient shape mismatch for " + w.name);
  Tensor dx = Tensor::zeros({batch, in});
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < in; ++j) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += dy.at(i, o) * w.value.at(j, o);
      dx.at(i, j) = acc;
    }
  }
  if (accumulate_param_grads) {
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < in; ++j) {
        double xv = x_cache.at(i, j);
        for (std::size_t o = 0; o < out; ++o) w.grad.at(j, o) += xv * dy.at(i, o);
      }
      if (has_bias)
        for (std::size_t o = 0; o < out; ++o) b.grad.at(o) += dy.at(i, o);
    }
  }
  return dx;
}

Vec Dense::apply(const Vec& x) const {
  if (x.size() != in_dim())
    throw ContractViolation("Dense::apply: input size mismatch for " + w.name);
  std::size_t in = in_dim(), out = out_dim();
  Vec y(out, 0.0);
  if (has_bias)
    for (std::size_t o = 0; o < out; ++o) y[o] = b.value.at(o);
  for (std::size_t j = 0; j < in; ++j)
    for (std::size_t o = 0; o < out; ++o) y[o] += x[j] * w.value.at(j, o);
  return y;
}

Conv1d::Conv1d(const std::string& name, std::size_t in_ch, std::size_t out_ch,
               std::size_t ks, Rng& rng, bool with_bias)
    : k(name + ".k", init_weights({out_ch, in_ch, ks}, in_ch * ks, rng)),
      b(name + ".b", Tensor::zeros({out_ch})),
      has_bias(with_bias),
      ksize(ks) {
  if (ks % 2 == 0) throw ContractViolation("Conv1d: kernel size must be odd");
}

Tensor Conv1d::apply(const Tensor& x) const {
  if (x.shape.size() != 3 || x.dim(1) != in_ch())
    throw ContractViolation("Conv1d: input shape mismatch for " + k.name);
  std::size_t batch = x.dim(0), ci = in_ch(), co = out_ch(), len = x.dim(2);
  std::size_t pad = (ksize - 1) / 2;
  Tensor y = Tensor::zeros({batch, co, len});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < co; ++o) {
      for (std::size_t l = 0; l < len; ++l) {
        double acc = has_bias ? b.value.at(o) : 0.0;
        for (std::size_t c = 0; c < ci; ++c) {
          for (std::size_t t = 0; t < ksize; ++t) {
            std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + t) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            acc += x.at(n, c, static_cast<std::size_t>(src)) * k.value.at(o, c, t);
          }
        }
        y.at(n, o, l) = acc;
      }
    }
  }
  return y;
}

Tensor Conv1d::forward(const Tensor& x) {
  x_cache = x;
  return apply(x);
}

Tensor Conv1d::backward(const Tensor& dy, bool accumulate_param_grads) {
  const Tensor& x = x_cache;
  std::size_t batch = x.dim(0), ci = in_ch(), co = out_ch(), len = x.dim(2);
  std::size_t pad = (ksize - 1) / 2;
  if (dy.shape.size() != 3 || dy.dim(0) != batch || dy.dim(1) != co || dy.dim(2) != len)
    throw ContractViolation("Conv1d::backward: gradient shape mismatch for " + k.name);
  Tensor dx = Tensor::zeros({batch, ci, len});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < co; ++o) {
      for (std::size_t l = 0; l < len; ++l) {
        double g = dy.at(n, o, l);
        if (accumulate_param_grads && has_bias) b.grad.at(o) += g;
        for (std::size_t c = 0; c < ci; ++c) {
          for (std::size_t t = 0; t < ksize; ++t) {
            std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + t) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            dx.at(n, c, static_cast<std::size_t>(src)) += g * k.value.at(o, c, t);
            if (accumulate_param_grads)
              k.grad.at(o, c, t) += g * x.at(n, c, static_cast<std::size_t>(src));
          }
        }
      }
    }
  }
  return dx;
}

LeakyRelu::LeakyRelu(double s) : slope(s) {
  if (s < 0.0 || s >= 1.0) throw ContractViolation("LeakyRelu: slope must be in [0,1)");
}

Tensor LeakyRelu::apply(const Tensor& x) const {
  Tensor y = x;
  for (double& v : y.data) v = std::max(v, slope * v);
  return y;
}

Tensor LeakyRelu::forward(const Tensor& x) {
  x_cache = x;
  return apply(x);
}

Tensor LeakyRelu::backward(const Tensor& dy) const {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    dx.at(i) *= x_cache.at(i) > 0.0 ? 1.0 : slope;
  return dx;
}

Vec softmax(const Vec& z) {
  require_finite(z, "softmax");
  double m = *std::max_element(z.begin(), z.end());
  Vec p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

CrossEntropyResult cross_entropy(const Vec& z, std::size_t target) {
  if (target >= z.size())
    throw ContractViolation("cross_entropy: target class out of range");
  double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  double loss = std::log(sum) - (z[target] - m);
  Vec grad = softmax(z);
  grad[target] -= 1.0;
  return {loss, std::move(grad)};
}

BatchCrossEntropyResult mean_cross_entropy(const Tensor& z, const std::vector<std::size_t>& targets) {
  std::size_t batch = z.dim(0), m = z.dim(1);
  if (targets.size() != batch)
    throw ContractViolation("mean_cross_entropy: batch/label count mismatch");
  Tensor dz = Tensor::zeros(z.shape);
  double total = 0.0;
  Vec row(m);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < m; ++j) row[j] = z.at(i, j);
    CrossEntropyResult r = cross_entropy(row, targets[i]);
    total += r.loss;
    for (std::size_t j = 0; j < m; ++j) dz.at(i, j) = r.dloss_dz[j] / static_cast<double>(batch);
  }
  return {total / static_cast<double>(batch), std::move(dz)};
}

std::size_t argmax(const Vec& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

namespace {

std::uint64_t fnv1a_update(std::uint64_t h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t params_checksum(const ParamRefs& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Param* p : params) {
    h = fnv1a_update(h, p->name.data(), p->name.size());
    for (std::size_t d : p->value.shape) {
      std::uint64_t dd = d;
      h = fnv1a_update(h, &dd, sizeof dd);
    }
    h = fnv1a_update(h, p->value.data.data(), p->value.data.size() * sizeof(double));
  }
  return h;
}

}  // namespace sbp

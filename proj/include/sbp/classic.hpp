#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbp/dataset.hpp"
#include "sbp/nn.hpp"
#include "sbp/rng.hpp"

namespace sbp {

// Biased relationship classifier: two leaky-ReLU hidden layers and a linear
// head over the context feature. Once frozen its parameters are checksummed
// and rejected by every optimizer.
struct ClassicModel {
  Dense enc1, enc2, head;
  LeakyRelu act1{0.2}, act2{0.2};
  bool frozen = false;
  std::uint64_t param_checksum = 0;

  ClassicModel() = default;
  ClassicModel(std::size_t input_dim, std::size_t m_classes, Rng& rng,
               std::size_t hidden = 64);

  std::size_t input_dim() const { return enc1.in_dim(); }
  std::size_t m_classes() const { return head.out_dim(); }

  Tensor forward(const Tensor& ctx);          // training path, caches
  void backward(const Tensor& dlogits);
  Vec logits(const Vec& ctx) const;           // cache-free evaluation path
  ParamRefs params();
  ParamRefs params() const;

  void freeze();                              // idempotent
  std::uint64_t checksum() const;
  void verify_checksum(const std::string& where) const;
};

struct ClassicHyper {
  double lr = 0.001;
  std::size_t batch = 16;
  std::size_t iters = 18000;
};

struct ClassicTrainResult {
  ClassicModel model;   // returned unfrozen
  Vec loss_trace;       // one entry per iteration
};

// Minimizes mean cross-entropy with SGD over shuffled mini-batches.
ClassicTrainResult train_classic(const Dataset& ds, const ClassicHyper& hyper, Rng& rng);

// ---------------------------------------------------------------------------
// Context encoder phi: maps a context feature to a length-M vector. Parameters
// are randomly initialized and never trained; no loss is defined for them.
// ---------------------------------------------------------------------------

enum class PhiVariant { Fc, Trans1, Trans2 };

std::string to_string(PhiVariant v);
PhiVariant phi_variant_from_string(const std::string& s);

// Single-head self-attention over the context reshaped into fixed-size chunks.
struct AttentionBlock {
  Param wq, wk, wv;  // [d, d] each

  AttentionBlock() = default;
  AttentionBlock(const std::string& name, std::size_t d, Rng& rng);

  // rows: [T, d] -> [T, d]
  std::vector<Vec> apply(const std::vector<Vec>& rows) const;
};

struct PhiEncoder {
  PhiVariant variant = PhiVariant::Trans1;
  std::size_t input_dim = 0;
  std::size_t out_dim = 0;
  static constexpr std::size_t kChunks = 8;

  Dense proj;                          // fc: [input_dim, M]; trans: [chunk, M]
  std::vector<AttentionBlock> blocks;  // 0 (fc), 1 (trans1) or 2 (trans2)

  PhiEncoder() = default;
  PhiEncoder(PhiVariant variant, std::size_t input_dim, std::size_t m_classes, Rng& rng);
};

Vec phi_forward(const PhiEncoder& phi, const Vec& ctx);

}  // namespace sbp

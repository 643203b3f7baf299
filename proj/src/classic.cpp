#include "sbp/classic.hpp"

#include <cmath>
#include <numeric>

#include "sbp/errors.hpp"
#include "sbp/optim.hpp"

namespace sbp {

ClassicModel::ClassicModel(std::size_t input_dim, std::size_t m_classes, Rng& rng,
                           std::size_t hidden)
    : enc1("classic.enc1", input_dim, hidden, rng),
      enc2("classic.enc2", hidden, hidden, rng),
      head("classic.head", hidden, m_classes, rng) {}

Tensor ClassicModel::forward(const Tensor& ctx) {
  Tensor h = act1.forward(enc1.forward(ctx));
  h = act2.forward(enc2.forward(h));
  Tensor z = head.forward(h);
  require_finite(z, "classic_forward");
  return z;
}

void ClassicModel::backward(const Tensor& dlogits) {
  Tensor d = head.backward(dlogits);
  d = act2.backward(d);
  d = enc2.backward(d);
  d = act1.backward(d);
  enc1.backward(d);
}

Vec ClassicModel::logits(const Vec& ctx) const {
  if (ctx.size() != input_dim())
    throw ContractViolation("classic_forward: context dimension mismatch");
  Vec h = enc1.apply(ctx);
  for (double& v : h) v = std::max(v, act1.slope * v);
  h = enc2.apply(h);
  for (double& v : h) v = std::max(v, act2.slope * v);
  Vec z = head.apply(h);
  require_finite(z, "classic_forward");
  return z;
}

ParamRefs ClassicModel::params() {
  return {&enc1.w, &enc1.b, &enc2.w, &enc2.b, &head.w, &head.b};
}

ParamRefs ClassicModel::params() const {
  auto* self = const_cast<ClassicModel*>(this);
  return self->params();
}

std::uint64_t ClassicModel::checksum() const { return params_checksum(params()); }

void ClassicModel::freeze() {
  if (frozen) return;
  for (Param* p : params()) p->frozen = true;
  frozen = true;
  param_checksum = checksum();
}

void ClassicModel::verify_checksum(const std::string& where) const {
  if (!frozen) throw FreezeViolation(where + ": classic model is not frozen");
  if (checksum() != param_checksum)
    throw FreezeViolation(where + ": frozen classic parameters changed");
}

ClassicTrainResult train_classic(const Dataset& ds, const ClassicHyper& hyper, Rng& rng) {
  if (ds.train.empty()) throw ContractViolation("train_classic: empty dataset");
  Rng init_rng = rng.split(1);
  Rng batch_rng = rng.split(2);
  ClassicTrainResult result{ClassicModel(ds.spec.feature_dim(), ds.spec.m_classes, init_rng), {}};
  ClassicModel& model = result.model;
  result.loss_trace.reserve(hyper.iters);

  std::vector<std::size_t> order(ds.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle on first use

  std::size_t batch = std::min(hyper.batch, ds.train.size());
  Tensor x = Tensor::zeros({batch, ds.spec.feature_dim()});
  std::vector<std::size_t> labels(batch);

  for (std::size_t it = 0; it < hyper.iters; ++it) {
    for (std::size_t i = 0; i < batch; ++i) {
      if (cursor >= order.size()) {
        batch_rng.shuffle(order);
        cursor = 0;
      }
      const Sample& s = ds.train[order[cursor++]];
      for (std::size_t d = 0; d < s.ctx.size(); ++d) x.at(i, d) = s.ctx[d];
      labels[i] = s.label;
    }
    zero_grads(model.params());
    Tensor z = model.forward(x);
    BatchCrossEntropyResult ce = mean_cross_entropy(z, labels);
    if (!std::isfinite(ce.loss)) throw TrainingDivergence("train_classic: loss diverged");
    model.backward(ce.dloss_dz);
    sgd_step(model.params(), hyper.lr);
    result.loss_trace.push_back(ce.loss);
  }
  return result;
}

std::string to_string(PhiVariant v) {
  switch (v) {
    case PhiVariant::Fc: return "fc";
    case PhiVariant::Trans1: return "trans1";
    default: return "trans2";
  }
}

PhiVariant phi_variant_from_string(const std::string& s) {
  if (s == "fc") return PhiVariant::Fc;
  if (s == "trans1") return PhiVariant::Trans1;
  if (s == "trans2") return PhiVariant::Trans2;
  throw UsageError("unknown phi variant '" + s + "' (expected fc|trans1|trans2)");
}

AttentionBlock::AttentionBlock(const std::string& name, std::size_t d, Rng& rng) {
  auto init = [&](const char* suffix) {
    Tensor t = Tensor::zeros({d, d});
    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& v : t.data) v = scale * rng.normal();
    return Param(name + suffix, std::move(t));
  };
  wq = init(".wq");
  wk = init(".wk");
  wv = init(".wv");
}

std::vector<Vec> AttentionBlock::apply(const std::vector<Vec>& rows) const {
  std::size_t t_len = rows.size();
  std::size_t d = wq.value.dim(0);
  auto project = [&](const Param& w) {
    std::vector<Vec> out(t_len, Vec(d, 0.0));
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out[t][j] += rows[t][i] * w.value.at(i, j);
    return out;
  };
  std::vector<Vec> q = project(wq), k = project(wk), v = project(wv);
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Vec> out(t_len, Vec(d, 0.0));
  for (std::size_t t = 0; t < t_len; ++t) {
    Vec scores(t_len);
    for (std::size_t u = 0; u < t_len; ++u) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += q[t][i] * k[u][i];
      scores[u] = dot * inv_sqrt_d;
    }
    Vec attn = softmax(scores);
    for (std::size_t u = 0; u < t_len; ++u)
      for (std::size_t i = 0; i < d; ++i) out[t][i] += attn[u] * v[u][i];
  }
  return out;
}

PhiEncoder::PhiEncoder(PhiVariant var, std::size_t in_dim, std::size_t m_classes, Rng& rng)
    : variant(var), input_dim(in_dim), out_dim(m_classes) {
  if (variant == PhiVariant::Fc) {
    proj = Dense("phi.proj", in_dim, m_classes, rng);
    return;
  }
  if (in_dim % kChunks != 0)
    throw ContractViolation("PhiEncoder: input dimension must be divisible by " +
                            std::to_string(kChunks));
  std::size_t d = in_dim / kChunks;
  std::size_t n_blocks = variant == PhiVariant::Trans1 ? 1 : 2;
  for (std::size_t i = 0; i < n_blocks; ++i)
    blocks.emplace_back("phi.attn" + std::to_string(i + 1), d, rng);
  proj = Dense("phi.proj", d, m_classes, rng);
}

Vec phi_forward(const PhiEncoder& phi, const Vec& ctx) {
  if (ctx.size() != phi.input_dim)
    throw ContractViolation("phi_forward: context dimension mismatch");
  if (phi.variant == PhiVariant::Fc) {
    Vec out = phi.proj.apply(ctx);
    require_finite(out, "phi_forward");
    return out;
  }
  std::size_t d = phi.input_dim / PhiEncoder::kChunks;
  std::vector<Vec> rows(PhiEncoder::kChunks, Vec(d));
  for (std::size_t t = 0; t < PhiEncoder::kChunks; ++t)
    for (std::size_t i = 0; i < d; ++i) rows[t][i] = ctx[t * d + i];
  for (const AttentionBlock& block : phi.blocks) rows = block.apply(rows);
  Vec pooled(d, 0.0);
  for (const Vec& row : rows)
    for (std::size_t i = 0; i < d; ++i) pooled[i] += row[i];
  for (double& v : pooled) v /= static_cast<double>(PhiEncoder::kChunks);
  Vec out = phi.proj.apply(pooled);
  require_finite(out, "phi_forward");
  return out;
}

}  // namespace sbp

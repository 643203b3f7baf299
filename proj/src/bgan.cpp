#include "sbp/bgan.hpp"

#include <cmath>
#include <numeric>

#include "sbp/errors.hpp"
#include "sbp/optim.hpp"

namespace sbp {

namespace {
constexpr double kRmsDecay = 0.9;
constexpr double kRmsEps = 1e-8;
constexpr std::size_t kFcHidden = 64;
}  // namespace

std::string to_string(LrSchedule s) {
  return s == LrSchedule::Constant ? "constant" : "linear_decay";
}

LrSchedule lr_schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::Constant;
  if (s == "linear_decay") return LrSchedule::LinearDecay;
  throw UsageError("unknown lr_schedule '" + s + "' (expected constant|linear_decay)");
}

std::string to_string(TrainMode m) {
  return m == TrainMode::Gradual ? "gradual" : "integrated";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "gradual") return TrainMode::Gradual;
  if (s == "integrated") return TrainMode::Integrated;
  throw UsageError("unknown training mode '" + s + "' (expected gradual|integrated)");
}

std::string to_string(NetVariant v) {
  switch (v) {
    case NetVariant::Bgan: return "bgan";
    case NetVariant::BganFc: return "bgan_fc";
    case NetVariant::Fc5: return "fc5";
    default: return "1d5";
  }
}

NetVariant net_variant_from_string(const std::string& s) {
  if (s == "bgan") return NetVariant::Bgan;
  if (s == "bgan_fc") return NetVariant::BganFc;
  if (s == "fc5") return NetVariant::Fc5;
  if (s == "1d5") return NetVariant::Conv5;
  throw UsageError("unknown net_variant '" + s + "' (expected bgan|bgan_fc|fc5|1d5)");
}

void BganHyper::validate() const {
  if (lr_g <= 0.0 || lr_d <= 0.0) throw UsageError("bgan: learning rates must be positive");
  if (critic_ratio < 1) throw UsageError("bgan: critic_ratio must be >= 1");
  if (alpha < 0.0) throw UsageError("bgan: alpha must be >= 0");
  if (clip_c < 0.0) throw UsageError("bgan: clip_c must be >= 0");
  if (batch == 0) throw UsageError("bgan: batch must be positive");
  if (g_layers < 1 || d_layers < 1) throw UsageError("bgan: layer counts must be >= 1");
  if (channels < 1) throw UsageError("bgan: channels must be >= 1");
  if (ksize % 2 == 0) throw UsageError("bgan: ksize must be odd");
}

namespace {

bool uses_conv_generator(NetVariant v) {
  return v == NetVariant::Bgan || v == NetVariant::Conv5;
}

bool adversarial(NetVariant v) {
  return v == NetVariant::Bgan || v == NetVariant::BganFc;
}

// The critic's final layer is bias-free: the Wasserstein loss is invariant to
// a uniform score shift, so a final bias would never receive gradient.
std::vector<Conv1d> make_conv_stack(const std::string& name, std::size_t in_ch,
                                    std::size_t layers, std::size_t channels,
                                    std::size_t ksize, Rng& rng, bool final_bias) {
  std::vector<Conv1d> convs;
  for (std::size_t i = 0; i < layers; ++i) {
    std::size_t ci = i == 0 ? in_ch : channels;
    bool last = i + 1 == layers;
    std::size_t co = last ? 1 : channels;
    convs.emplace_back(name + std::to_string(i + 1), ci, co, ksize, rng,
                       final_bias || !last);
  }
  return convs;
}

std::vector<Dense> make_dense_stack(const std::string& name, std::size_t in,
                                    std::size_t out, std::size_t layers, Rng& rng,
                                    bool final_bias) {
  std::vector<Dense> fcs;
  for (std::size_t i = 0; i < layers; ++i) {
    std::size_t ci = i == 0 ? in : kFcHidden;
    bool last = i + 1 == layers;
    std::size_t co = last ? out : kFcHidden;
    fcs.emplace_back(name + std::to_string(i + 1), ci, co, rng, final_bias || !last);
  }
  return fcs;
}

}  // namespace

Generator::Generator(NetVariant var, std::size_t ctx_dim_, std::size_t m_,
                     const BganHyper& hyper, Rng& rng)
    : variant(var), m(m_), ctx_dim(ctx_dim_) {
  if (uses_conv_generator(variant)) {
    input_proj = Dense("gen.proj", ctx_dim, m, rng);
    convs = make_conv_stack("gen.conv", 3, hyper.g_layers, hyper.channels, hyper.ksize,
                            rng, /*final_bias=*/true);
    acts.assign(hyper.g_layers > 0 ? hyper.g_layers - 1 : 0, LeakyRelu(0.2));
  } else {
    fcs = make_dense_stack("gen.fc", ctx_dim + 2 * m, m, hyper.g_layers, rng,
                           /*final_bias=*/true);
    acts.assign(hyper.g_layers > 0 ? hyper.g_layers - 1 : 0, LeakyRelu(0.2));
  }
}

ParamRefs Generator::params() {
  ParamRefs refs;
  if (uses_conv_generator(variant)) {
    refs.push_back(&input_proj.w);
    refs.push_back(&input_proj.b);
    for (Conv1d& c : convs) {
      refs.push_back(&c.k);
      refs.push_back(&c.b);
    }
  } else {
    for (Dense& d : fcs) {
      refs.push_back(&d.w);
      refs.push_back(&d.b);
    }
  }
  return refs;
}

ParamRefs Generator::params() const { return const_cast<Generator*>(this)->params(); }

namespace {

void check_generator_inputs(std::size_t ctx_dim, std::size_t m, std::size_t got_ctx,
                            std::size_t got_bglo, std::size_t got_z) {
  if (got_ctx != ctx_dim) throw ContractViolation("g_forward: context dimension mismatch");
  if (got_bglo != m) throw ContractViolation("g_forward: b_glo length mismatch");
  if (got_z != m) throw ContractViolation("g_forward: logits length mismatch");
}

}  // namespace

Tensor Generator::forward(const Tensor& ctx, const Vec& b_glo, const Tensor& z) {
  std::size_t batch = ctx.dim(0);
  check_generator_inputs(ctx_dim, m, ctx.dim(1), b_glo.size(), z.dim(1));
  if (uses_conv_generator(variant)) {
    Tensor proj = input_proj.forward(ctx);  // [B,M]
    Tensor signal = Tensor::zeros({batch, 3, m});
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        signal.at(i, 0, j) = proj.at(i, j);
        signal.at(i, 1, j) = b_glo[j];
        signal.at(i, 2, j) = z.at(i, j);
      }
    Tensor h = signal;
    for (std::size_t l = 0; l < convs.size(); ++l) {
      h = convs[l].forward(h);
      if (l + 1 < convs.size()) h = acts[l].forward(h);
    }
    Tensor out = Tensor::zeros({batch, m});
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < m; ++j) out.at(i, j) = h.at(i, 0, j);
    require_finite(out, "g_forward");
    return out;
  }
  Tensor x = Tensor::zeros({batch, ctx_dim + 2 * m});
  for (std::size_t i = 0; i < batch; ++i) {
    std::size_t col = 0;
    for (std::size_t d = 0; d < ctx_dim; ++d) x.at(i, col++) = ctx.at(i, d);
    for (std::size_t j = 0; j < m; ++j) x.at(i, col++) = b_glo[j];
    for (std::size_t j = 0; j < m; ++j) x.at(i, col++) = z.at(i, j);
  }
  Tensor h = x;
  for (std::size_t l = 0; l < fcs.size(); ++l) {
    h = fcs[l].forward(h);
    if (l + 1 < fcs.size()) h = acts[l].forward(h);
  }
  require_finite(h, "g_forward");
  return h;
}

void Generator::backward(const Tensor& db_pre) {
  std::size_t batch = db_pre.dim(0);
  if (uses_conv_generator(variant)) {
    Tensor d = Tensor::zeros({batch, 1, m});
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < m; ++j) d.at(i, 0, j) = db_pre.at(i, j);
    for (std::size_t l = convs.size(); l-- > 0;) {
      d = convs[l].backward(d);
      if (l > 0) d = acts[l - 1].backward(d);
    }
    Tensor dproj = Tensor::zeros({batch, m});
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < m; ++j) dproj.at(i, j) = d.at(i, 0, j);
    input_proj.backward(dproj);
    return;
  }
  Tensor d = db_pre;
  for (std::size_t l = fcs.size(); l-- > 0;) {
    d = fcs[l].backward(d);
    if (l > 0) d = acts[l - 1].backward(d);
  }
}

Vec Generator::apply(const Vec& ctx, const Vec& b_glo, const Vec& z) const {
  check_generator_inputs(ctx_dim, m, ctx.size(), b_glo.size(), z.size());
  if (uses_conv_generator(variant)) {
    Vec proj = input_proj.apply(ctx);
    Tensor h = Tensor::zeros({1, 3, m});
    for (std::size_t j = 0; j < m; ++j) {
      h.at(0, 0, j) = proj[j];
      h.at(0, 1, j) = b_glo[j];
      h.at(0, 2, j) = z[j];
    }
    for (std::size_t l = 0; l < convs.size(); ++l) {
      h = convs[l].apply(h);
      if (l + 1 < convs.size()) h = acts[l].apply(h);
    }
    Vec out(m);
    for (std::size_t j = 0; j < m; ++j) out[j] = h.at(0, 0, j);
    require_finite(out, "g_forward");
    return out;
  }
  Vec x;
  x.reserve(ctx_dim + 2 * m);
  x.insert(x.end(), ctx.begin(), ctx.end());
  x.insert(x.end(), b_glo.begin(), b_glo.end());
  x.insert(x.end(), z.begin(), z.end());
  for (std::size_t l = 0; l < fcs.size(); ++l) {
    x = fcs[l].apply(x);
    if (l + 1 < fcs.size())
      for (double& v : x) v = std::max(v, acts[l].slope * v);
  }
  require_finite(x, "g_forward");
  return x;
}

Critic::Critic(NetVariant var, std::size_t m_, const BganHyper& hyper, Rng& rng)
    : variant(var), m(m_) {
  if (uses_conv_generator(variant)) {
    convs = make_conv_stack("critic.conv", 1, hyper.d_layers, hyper.channels, hyper.ksize,
                            rng, /*final_bias=*/false);
    acts.assign(hyper.d_layers > 0 ? hyper.d_layers - 1 : 0, LeakyRelu(0.2));
  } else {
    fcs = make_dense_stack("critic.fc", m, 1, hyper.d_layers, rng, /*final_bias=*/false);
    acts.assign(hyper.d_layers > 0 ? hyper.d_layers - 1 : 0, LeakyRelu(0.2));
  }
}

ParamRefs Critic::params() {
  ParamRefs refs;
  for (Conv1d& c : convs) {
    refs.push_back(&c.k);
    if (c.has_bias) refs.push_back(&c.b);
  }
  for (Dense& d : fcs) {
    refs.push_back(&d.w);
    if (d.has_bias) refs.push_back(&d.b);
  }
  return refs;
}

ParamRefs Critic::params() const { return const_cast<Critic*>(this)->params(); }

Vec Critic::forward(const Tensor& bias_batch) {
  std::size_t batch = bias_batch.dim(0);
  if (bias_batch.dim(1) != m) throw ContractViolation("d_forward: bias length mismatch");
  if (!convs.empty()) {
    Tensor h = Tensor::zeros({batch, 1, m});
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < m; ++j) h.at(i, 0, j) = bias_batch.at(i, j);
    for (std::size_t l = 0; l < convs.size(); ++l) {
      h = convs[l].forward(h);
      if (l + 1 < convs.size()) h = acts[l].forward(h);
    }
    Vec scores(batch, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < m; ++j) scores[i] += h.at(i, 0, j);
      scores[i] /= static_cast<double>(m);
    }
    require_finite(scores, "d_forward");
    return scores;
  }
  Tensor h = bias_batch;
  for (std::size_t l = 0; l < fcs.size(); ++l) {
    h = fcs[l].forward(h);
    if (l + 1 < fcs.size()) h = acts[l].forward(h);
  }
  Vec scores(batch);
  for (std::size_t i = 0; i < batch; ++i) scores[i] = h.at(i, 0);
  require_finite(scores, "d_forward");
  return scores;
}

Tensor Critic::backward(const Vec& dscores, bool accumulate_param_grads) {
  std::size_t batch = dscores.size();
  if (!convs.empty()) {
    Tensor d = Tensor::zeros({batch, 1, m});
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < m; ++j)
        d.at(i, 0, j) = dscores[i] / static_cast<double>(m);
    for (std::size_t l = convs.size(); l-- > 0;) {
      d = convs[l].backward(d, accumulate_param_grads);
      if (l > 0) d = acts[l - 1].backward(d);
    }
    Tensor dx = Tensor::zeros({batch, m});
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < m; ++j) dx.at(i, j) = d.at(i, 0, j);
    return dx;
  }
  Tensor d = Tensor::zeros({batch, 1});
  for (std::size_t i = 0; i < batch; ++i) d.at(i, 0) = dscores[i];
  for (std::size_t l = fcs.size(); l-- > 0;) {
    d = fcs[l].backward(d, accumulate_param_grads);
    if (l > 0) d = acts[l - 1].backward(d);
  }
  return d;
}

double Critic::apply(const Vec& bias) const {
  if (bias.size() != m) throw ContractViolation("d_forward: bias length mismatch");
  if (!convs.empty()) {
    Tensor h = Tensor::zeros({1, 1, m});
    for (std::size_t j = 0; j < m; ++j) h.at(0, 0, j) = bias[j];
    for (std::size_t l = 0; l < convs.size(); ++l) {
      h = convs[l].apply(h);
      if (l + 1 < convs.size()) h = acts[l].apply(h);
    }
    double score = 0.0;
    for (std::size_t j = 0; j < m; ++j) score += h.at(0, 0, j);
    score /= static_cast<double>(m);
    if (!std::isfinite(score)) throw TrainingDivergence("d_forward: non-finite score");
    return score;
  }
  Vec x = bias;
  for (std::size_t l = 0; l < fcs.size(); ++l) {
    x = fcs[l].apply(x);
    if (l + 1 < fcs.size())
      for (double& v : x) v = std::max(v, acts[l].slope * v);
  }
  if (!std::isfinite(x[0])) throw TrainingDivergence("d_forward: non-finite score");
  return x[0];
}

double loss_g_value(const Vec& scores_g, const Tensor& zhat,
                    const std::vector<std::size_t>& labels, double alpha) {
  if (scores_g.empty()) throw ContractViolation("loss_g: empty batch");
  double mean_score = std::accumulate(scores_g.begin(), scores_g.end(), 0.0) /
                      static_cast<double>(scores_g.size());
  double ce = mean_cross_entropy(zhat, labels).loss;
  return -mean_score + alpha * ce;
}

double loss_d_value(const Vec& scores_s, const Vec& scores_g) {
  if (scores_s.empty() || scores_g.empty()) throw ContractViolation("loss_d: empty batch");
  double ms = std::accumulate(scores_s.begin(), scores_s.end(), 0.0) /
              static_cast<double>(scores_s.size());
  double mg = std::accumulate(scores_g.begin(), scores_g.end(), 0.0) /
              static_cast<double>(scores_g.size());
  return -ms + mg;
}

CriticStepResult critic_loss_and_grads(Critic& critic, const Tensor& b_tru,
                                       const Tensor& b_pre) {
  std::size_t bs = b_tru.dim(0);
  std::size_t bg = b_pre.dim(0);
  CriticStepResult result;
  result.scores_s = critic.forward(b_tru);
  critic.backward(Vec(bs, -1.0 / static_cast<double>(bs)), true);
  result.scores_g = critic.forward(b_pre);
  critic.backward(Vec(bg, 1.0 / static_cast<double>(bg)), true);
  result.loss = loss_d_value(result.scores_s, result.scores_g);
  return result;
}

double generator_loss_and_grads(Generator& gen, Critic& critic, const Tensor& ctx,
                                const Vec& b_glo, const Tensor& z,
                                const std::vector<std::size_t>& labels, double alpha) {
  std::size_t batch = ctx.dim(0);
  Tensor b_pre = gen.forward(ctx, b_glo, z);
  Vec scores_g = critic.forward(b_pre);

  Tensor zhat = z;
  for (std::size_t i = 0; i < zhat.size(); ++i) zhat.at(i) += b_pre.at(i);
  BatchCrossEntropyResult ce = mean_cross_entropy(zhat, labels);

  Tensor db_pre = critic.backward(Vec(batch, -1.0 / static_cast<double>(batch)),
                                  /*accumulate_param_grads=*/false);
  for (std::size_t i = 0; i < db_pre.size(); ++i)
    db_pre.at(i) += alpha * ce.dloss_dz.at(i);
  gen.backward(db_pre);

  double mean_score = std::accumulate(scores_g.begin(), scores_g.end(), 0.0) /
                      static_cast<double>(batch);
  return -mean_score + alpha * ce.loss;
}

BganState init_bgan(const BganHyper& hyper, std::size_t ctx_dim, std::size_t m, Rng& rng) {
  hyper.validate();
  Rng g_rng = rng.split(1);
  Rng d_rng = rng.split(2);
  BganState state;
  state.gen = Generator(hyper.variant, ctx_dim, m, hyper, g_rng);
  state.critic = Critic(hyper.variant, m, hyper, d_rng);
  state.lr_g = hyper.lr_g;
  state.lr_d = hyper.lr_d;
  return state;
}

namespace {

struct BatchTensors {
  Tensor ctx;
  Tensor z;
  std::vector<std::size_t> labels;
};

BatchTensors assemble_batch(const std::vector<const Sample*>& batch,
                            const ClassicModel& model) {
  std::size_t bs = batch.size();
  std::size_t dim = batch.empty() ? 0 : batch[0]->ctx.size();
  std::size_t m = model.m_classes();
  BatchTensors t{Tensor::zeros({bs, dim}), Tensor::zeros({bs, m}), {}};
  t.labels.reserve(bs);
  for (std::size_t i = 0; i < bs; ++i) {
    const Sample& s = *batch[i];
    for (std::size_t d = 0; d < dim; ++d) t.ctx.at(i, d) = s.ctx[d];
    Vec z = model.logits(s.ctx);
    for (std::size_t j = 0; j < m; ++j) t.z.at(i, j) = z[j];
    t.labels.push_back(s.label);
  }
  return t;
}

void record_margins(BganTrainStats& stats, const std::vector<CorrectionBias>& set,
                    double eps_c) {
  for (const CorrectionBias& cb : set) {
    ++stats.constructions;
    if (cb.margin < stats.min_margin) stats.min_margin = cb.margin;
    if (cb.margin < 0.9 * eps_c) ++stats.margin_violations;
  }
}

Tensor bias_set_tensor(const std::vector<CorrectionBias>& set, std::size_t m) {
  Tensor t = Tensor::zeros({set.size(), m});
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) t.at(i, j) = set[i].b_tru[j];
  return t;
}

void apply_lr_schedule(BganState& state, const BganHyper& hyper) {
  ++state.iteration;
  if (hyper.lr_schedule == LrSchedule::LinearDecay) {
    double remaining = hyper.iters == 0
                           ? 1.0
                           : 1.0 - static_cast<double>(state.iteration) /
                                       static_cast<double>(hyper.iters);
    if (remaining < 0.0) remaining = 0.0;
    state.lr_g = hyper.lr_g * remaining;
    state.lr_d = hyper.lr_d * remaining;
  }
}

// Shared by the gradual and integrated paths; the caller guarantees the model
// state it wants (frozen for gradual).
void run_iteration(BganState& state, const std::vector<const Sample*>& batch,
                   const ClassicModel& model, const PhiEncoder& phi,
                   const GlobalBias& gb, const BganHyper& hyper, double eps_c) {
  BatchTensors bt = assemble_batch(batch, model);
  std::size_t m = model.m_classes();
  const Vec& b_glo = gb.b_glo;

  if (!adversarial(hyper.variant)) {
    // Plain regression onto the constructed biases.
    auto set = build_batch_set_unchecked(batch, model, phi, gb, eps_c);
    record_margins(state.stats, set, eps_c);
    Tensor b_tru = bias_set_tensor(set, m);
    zero_grads(state.gen.params());
    Tensor b_pre = state.gen.forward(bt.ctx, b_glo, bt.z);
    double n = static_cast<double>(b_pre.size());
    double loss = 0.0;
    Tensor dmse = Tensor::zeros(b_pre.shape);
    for (std::size_t i = 0; i < b_pre.size(); ++i) {
      double diff = b_pre.at(i) - b_tru.at(i);
      loss += diff * diff / n;
      dmse.at(i) = 2.0 * diff / n;
    }
    if (!std::isfinite(loss)) throw TrainingDivergence("train_bgan: regression loss diverged");
    state.gen.backward(dmse);
    rmsprop_step(state.gen.params(), state.lr_g, kRmsDecay, kRmsEps);
    ++state.stats.generator_updates;
    state.stats.loss_g_trace.push_back(loss);
    state.stats.loss_d_trace.push_back(0.0);
    state.stats.critic_gap_trace.push_back(0.0);
    state.stats.lr_g_trace.push_back(state.lr_g);
    state.stats.lr_d_trace.push_back(state.lr_d);
    apply_lr_schedule(state, hyper);
    return;
  }

  double last_loss_d = 0.0;
  double last_gap = 0.0;
  for (std::size_t k = 1; k <= hyper.critic_ratio; ++k) {
    zero_grads(state.critic.params());
    Tensor b_pre = state.gen.forward(bt.ctx, b_glo, bt.z);
    auto set = build_batch_set_unchecked(batch, model, phi, gb, eps_c);
    record_margins(state.stats, set, eps_c);
    Tensor b_tru = bias_set_tensor(set, m);
    CriticStepResult step = critic_loss_and_grads(state.critic, b_tru, b_pre);
    if (!std::isfinite(step.loss)) throw TrainingDivergence("train_bgan: L_D diverged");
    rmsprop_step(state.critic.params(), state.lr_d, kRmsDecay, kRmsEps);
    if (hyper.clip_c > 0.0) clip_params(state.critic.params(), hyper.clip_c);
    ++state.stats.critic_updates;
    last_loss_d = step.loss;
    double gap = 0.0;
    for (std::size_t i = 0; i < step.scores_s.size(); ++i)
      gap += std::fabs(step.scores_s[i] - step.scores_g[i]);
    last_gap = gap / static_cast<double>(step.scores_s.size());

    if (k == hyper.critic_ratio) {
      zero_grads(state.gen.params());
      double loss_g = generator_loss_and_grads(state.gen, state.critic, bt.ctx, b_glo,
                                               bt.z, bt.labels, hyper.alpha);
      if (!std::isfinite(loss_g)) throw TrainingDivergence("train_bgan: L_G diverged");
      rmsprop_step(state.gen.params(), state.lr_g, kRmsDecay, kRmsEps);
      ++state.stats.generator_updates;
      state.stats.loss_g_trace.push_back(loss_g);
    }
  }
  state.stats.loss_d_trace.push_back(last_loss_d);
  state.stats.critic_gap_trace.push_back(last_gap);
  state.stats.lr_g_trace.push_back(state.lr_g);
  state.stats.lr_d_trace.push_back(state.lr_d);
  apply_lr_schedule(state, hyper);
}

class BatchCursor {
 public:
  BatchCursor(std::size_t n, Rng& rng) : order_(n), cursor_(n), rng_(&rng) {
    std::iota(order_.begin(), order_.end(), 0);
  }

  std::vector<const Sample*> next(const std::vector<Sample>& pool, std::size_t batch) {
    std::vector<const Sample*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      if (cursor_ >= order_.size()) {
        rng_->shuffle(order_);
        cursor_ = 0;
      }
      out.push_back(&pool[order_[cursor_++]]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_;
  Rng* rng_;
};

}  // namespace

void train_iteration(BganState& state, const std::vector<const Sample*>& batch,
                     const ClassicModel& model, const PhiEncoder& phi,
                     const GlobalBias& gb, const BganHyper& hyper, double eps_c) {
  if (!model.frozen)
    throw FreezeViolation("train_iteration: classic model must be frozen");
  run_iteration(state, batch, model, phi, gb, hyper, eps_c);
}

BganResult train_bgan(const ClassicModel& model, const PhiEncoder& phi,
                      const GlobalBias& gb, const Dataset& ds, const BganHyper& hyper,
                      double eps_c, Rng& rng) {
  hyper.validate();
  if (!model.frozen) throw FreezeViolation("train_bgan: classic model must be frozen");
  Rng init_rng = rng.split(1);
  Rng batch_rng = rng.split(2);
  BganState state = init_bgan(hyper, ds.spec.feature_dim(), ds.spec.m_classes, init_rng);

  BatchCursor cursor(ds.train.size(), batch_rng);
  std::size_t batch = std::min(hyper.batch, ds.train.size());
  for (std::size_t it = 0; it < hyper.iters; ++it) {
    auto samples = cursor.next(ds.train, batch);
    train_iteration(state, samples, model, phi, gb, hyper, eps_c);
  }
  model.verify_checksum("train_bgan");
  return {std::move(state.gen), std::move(state.critic), std::move(state.stats)};
}

IntegratedResult train_integrated(const Dataset& ds, const ClassicHyper& classic_hyper,
                                  const BganHyper& hyper, const PhiEncoder& phi,
                                  const GlobalBias& gb, double eps_c, Rng& rng) {
  hyper.validate();
  Rng classic_rng = rng.split(1);
  Rng bgan_rng = rng.split(2);
  Rng batch_rng = rng.split(3);

  Rng classic_init = classic_rng.split(1);
  IntegratedResult result;
  result.classic = ClassicModel(ds.spec.feature_dim(), ds.spec.m_classes, classic_init);

  Rng bgan_init = bgan_rng.split(1);
  BganHyper joint = hyper;
  joint.iters = classic_hyper.iters;  // lr schedule spans the joint run
  BganState state = init_bgan(joint, ds.spec.feature_dim(), ds.spec.m_classes, bgan_init);

  BatchCursor cursor(ds.train.size(), batch_rng);
  std::size_t batch = std::min(classic_hyper.batch, ds.train.size());
  result.classic_loss_trace.reserve(classic_hyper.iters);

  for (std::size_t it = 0; it < classic_hyper.iters; ++it) {
    auto samples = cursor.next(ds.train, batch);
    // Classic step (cross-entropy, SGD), then bias networks on current logits.
    std::size_t dim = ds.spec.feature_dim();
    Tensor x = Tensor::zeros({samples.size(), dim});
    std::vector<std::size_t> labels(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t d = 0; d < dim; ++d) x.at(i, d) = samples[i]->ctx[d];
      labels[i] = samples[i]->label;
    }
    zero_grads(result.classic.params());
    Tensor z = result.classic.forward(x);
    BatchCrossEntropyResult ce = mean_cross_entropy(z, labels);
    if (!std::isfinite(ce.loss)) throw TrainingDivergence("train_integrated: loss diverged");
    result.classic.backward(ce.dloss_dz);
    sgd_step(result.classic.params(), classic_hyper.lr);
    result.classic_loss_trace.push_back(ce.loss);

    run_iteration(state, samples, result.classic, phi, gb, joint, eps_c);
  }
  result.classic.freeze();
  result.gen = std::move(state.gen);
  result.critic = std::move(state.critic);
  result.stats = std::move(state.stats);
  return result;
}

}  // namespace sbp

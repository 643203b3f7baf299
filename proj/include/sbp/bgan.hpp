#pragma once

#include <limits>
#include <string>
#include <vector>

#include "sbp/bias.hpp"
#include "sbp/classic.hpp"
#include "sbp/dataset.hpp"
#include "sbp/nn.hpp"
#include "sbp/rng.hpp"

namespace sbp {

enum class LrSchedule { Constant, LinearDecay };
enum class TrainMode { Gradual, Integrated };
// bgan: 1-D conv G and D trained adversarially (default)
// bgan_fc: fully connected G and D trained adversarially
// fc5 / 1d5: plain networks regressing the constructed biases, no critic
enum class NetVariant { Bgan, BganFc, Fc5, Conv5 };

std::string to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(const std::string& s);
std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(NetVariant v);
NetVariant net_variant_from_string(const std::string& s);

struct BganHyper {
  double lr_g = 0.0001;
  double lr_d = 0.0005;
  std::size_t critic_ratio = 5;
  double alpha = 0.075;
  double clip_c = 0.01;          // 0 disables weight clipping
  std::size_t iters = 1000;
  std::size_t batch = 16;
  LrSchedule lr_schedule = LrSchedule::LinearDecay;
  TrainMode mode = TrainMode::Gradual;
  NetVariant variant = NetVariant::Bgan;
  std::size_t g_layers = 5;
  std::size_t d_layers = 3;
  std::size_t channels = 16;
  std::size_t ksize = 3;

  void validate() const;
};

// Predicts a sample-specific bias vector from (ctx, b_glo, z). The conv form
// projects ctx to a length-M channel and stacks it with b_glo and z as a
// 3-channel signal; the fc form runs a dense stack over their concatenation.
struct Generator {
  NetVariant variant = NetVariant::Bgan;
  std::size_t m = 0;
  std::size_t ctx_dim = 0;

  Dense input_proj;             // conv form: ctx -> length-M channel
  std::vector<Conv1d> convs;
  std::vector<Dense> fcs;       // fc form
  std::vector<LeakyRelu> acts;

  Generator() = default;
  Generator(NetVariant variant, std::size_t ctx_dim, std::size_t m,
            const BganHyper& hyper, Rng& rng);

  Tensor forward(const Tensor& ctx, const Vec& b_glo, const Tensor& z);  // [B,M]
  void backward(const Tensor& db_pre);
  Vec apply(const Vec& ctx, const Vec& b_glo, const Vec& z) const;
  ParamRefs params();
  ParamRefs params() const;
};

// Scores a bias vector; higher means closer to the constructed-bias set.
struct Critic {
  NetVariant variant = NetVariant::Bgan;
  std::size_t m = 0;

  std::vector<Conv1d> convs;    // conv form, mean-pooled over length
  std::vector<Dense> fcs;       // fc form
  std::vector<LeakyRelu> acts;

  Critic() = default;
  Critic(NetVariant variant, std::size_t m, const BganHyper& hyper, Rng& rng);

  Vec forward(const Tensor& bias_batch);                       // [B,M] -> [B]
  Tensor backward(const Vec& dscores, bool accumulate_param_grads);
  double apply(const Vec& bias) const;
  ParamRefs params();
  ParamRefs params() const;
};

// L_G = -mean(scores_g) + alpha * mean cross-entropy of (z + b_pre) vs labels.
double loss_g_value(const Vec& scores_g, const Tensor& zhat,
                    const std::vector<std::size_t>& labels, double alpha);

// L_D = -mean(scores_s) + mean(scores_g).
double loss_d_value(const Vec& scores_s, const Vec& scores_g);

struct CriticStepResult {
  double loss;
  Vec scores_s;
  Vec scores_g;
};

// Forward + backward of L_D into the critic parameters only; both bias
// batches are treated as constants.
CriticStepResult critic_loss_and_grads(Critic& critic, const Tensor& b_tru,
                                       const Tensor& b_pre);

// Forward + backward of L_G into the generator parameters only; the critic is
// traversed for its input gradient without touching its parameter grads.
double generator_loss_and_grads(Generator& gen, Critic& critic, const Tensor& ctx,
                                const Vec& b_glo, const Tensor& z,
                                const std::vector<std::size_t>& labels, double alpha);

struct BganTrainStats {
  std::size_t critic_updates = 0;
  std::size_t generator_updates = 0;
  std::size_t constructions = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::size_t margin_violations = 0;     // constructed margin < 0.9 * eps_c
  Vec loss_g_trace, loss_d_trace;        // one entry per iteration
  Vec lr_g_trace, lr_d_trace;
  Vec critic_gap_trace;                  // mean |T_S - T_G| per iteration
};

struct BganState {
  Generator gen;
  Critic critic;
  double lr_g = 0.0;
  double lr_d = 0.0;
  std::size_t iteration = 0;
  BganTrainStats stats;
};

BganState init_bgan(const BganHyper& hyper, std::size_t ctx_dim, std::size_t m, Rng& rng);

// One training iteration: critic_ratio critic updates on freshly constructed
// biases, one generator update on the last, then the lr schedule.
void train_iteration(BganState& state, const std::vector<const Sample*>& batch,
                     const ClassicModel& model, const PhiEncoder& phi,
                     const GlobalBias& gb, const BganHyper& hyper, double eps_c);

struct BganResult {
  Generator gen;
  Critic critic;
  BganTrainStats stats;
};

BganResult train_bgan(const ClassicModel& model, const PhiEncoder& phi,
                      const GlobalBias& gb, const Dataset& ds, const BganHyper& hyper,
                      double eps_c, Rng& rng);

struct IntegratedResult {
  ClassicModel classic;   // frozen on return
  Generator gen;
  Critic critic;
  BganTrainStats stats;
  Vec classic_loss_trace;
};

// Joint mode: the classic model keeps training (cross-entropy, SGD) while the
// bias networks train against its moving logits; frozen only at the end.
IntegratedResult train_integrated(const Dataset& ds, const ClassicHyper& classic_hyper,
                                  const BganHyper& hyper, const PhiEncoder& phi,
                                  const GlobalBias& gb, double eps_c, Rng& rng);

}  // namespace sbp

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sbp/bias.hpp"
#include "sbp/errors.hpp"

using namespace sbp;

namespace {

// phi that always maps to zero, so b_tru starts at b_glo alone.
PhiEncoder zero_phi(std::size_t ctx_dim, std::size_t m) {
  Rng rng(0);
  PhiEncoder phi(PhiVariant::Fc, ctx_dim, m, rng);
  phi.proj.w.value.fill(0.0);
  phi.proj.b.value.fill(0.0);
  return phi;
}

GlobalBias zero_gb(std::size_t m) { return GlobalBias{Vec(m, 0.0), 1.0, 0.0}; }

}  // namespace

TEST_CASE("global bias symmetric cases and derived values") {
  GlobalBias gb = global_bias({0.5, 0.5}, 1.0, 0.0);
  CHECK(gb.b_glo[0] == doctest::Approx(std::log(2.0)));
  CHECK(gb.b_glo[1] == doctest::Approx(std::log(2.0)));

  GlobalBias gb4 = global_bias({0.25, 0.25, 0.25, 0.25}, 2.0, 0.0);
  for (double v : gb4.b_glo) CHECK(v == doctest::Approx(std::log(4.0)));

  GlobalBias skew = global_bias({0.9, 0.1}, 1.0, 0.0);
  CHECK(skew.b_glo[0] == doctest::Approx(0.1054).epsilon(1e-3));
  CHECK(skew.b_glo[1] == doctest::Approx(2.3026).epsilon(1e-3));
}

TEST_CASE("global bias contract violations") {
  CHECK_THROWS_AS(global_bias({0.5, 0.0, 0.5}, 1.0, 0.0), ContractViolation);
  CHECK_THROWS_AS(global_bias({0.5, 0.5}, -1.0, 0.0), ContractViolation);
  CHECK_THROWS_AS(global_bias({}, 1.0, 0.0), ContractViolation);
}

TEST_CASE("global bias is permutation-equivariant and monotone") {
  Vec w = make_class_weights(6, 1.3);
  GlobalBias gb = global_bias(w, 1.0, 0.0);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    if (w[i + 1] < w[i]) CHECK(gb.b_glo[i + 1] > gb.b_glo[i]);
  }

  // permute w and compare
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Vec wp(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) wp[i] = w[perm[i]];
  GlobalBias gbp = global_bias(wp, 1.0, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(gbp.b_glo[i] == doctest::Approx(gb.b_glo[perm[i]]).epsilon(1e-14));

  // non-decreasing across a non-increasing weight vector, eps > 0
  GlobalBias gbe = global_bias(w, 0.7, 0.01);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) CHECK(gbe.b_glo[i + 1] >= gbe.b_glo[i]);
}

TEST_CASE("construct bias: forced closure on a two-class case") {
  PhiEncoder phi = zero_phi(4, 2);
  GlobalBias gb = zero_gb(2);
  Vec ctx(4, 0.0);
  CorrectionBias cb = construct_bias({2, 1}, ctx, phi, gb, 1, 1e-4);
  CHECK(cb.b_tru[0] == doctest::Approx(-1.0001).epsilon(1e-10));
  CHECK(cb.b_tru[1] == 0.0);
  Vec zhat{2 + cb.b_tru[0], 1 + cb.b_tru[1]};
  CHECK(argmax(zhat) == 1);
  CHECK(cb.margin == doctest::Approx(1e-4).epsilon(1e-6));
}

TEST_CASE("construct bias: pre-satisfied condition leaves initialization unchanged") {
  PhiEncoder phi = zero_phi(4, 3);
  GlobalBias gb = zero_gb(3);
  Vec ctx(4, 0.0);
  CorrectionBias cb = construct_bias({1, 5, 2}, ctx, phi, gb, 1, 1e-4);
  for (double v : cb.b_tru) CHECK(v == 0.0);
  CHECK(cb.margin == doctest::Approx(3.0));
}

TEST_CASE("construct bias: hand-traced two-pass loop") {
  PhiEncoder phi = zero_phi(4, 3);
  GlobalBias gb = zero_gb(3);
  Vec ctx(4, 0.0);
  CorrectionBias cb = construct_bias({5, 4, 3}, ctx, phi, gb, 2, 1e-4);
  CHECK(cb.b_tru[0] == doctest::Approx(-2.0001).epsilon(1e-10));
  CHECK(cb.b_tru[1] == doctest::Approx(-1.0001).epsilon(1e-10));
  CHECK(cb.b_tru[2] == 0.0);
  Vec zhat{5 + cb.b_tru[0], 4 + cb.b_tru[1], 3.0};
  CHECK(argmax(zhat) == 2);
  CHECK(cb.margin == doctest::Approx(1e-4).epsilon(1e-6));
}

TEST_CASE("construct bias randomized contract") {
  Rng rng(17);
  const double eps_c = 1e-4;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t m = 3 + rng.below(8);
    std::size_t ctx_dim = 8;
    Rng phi_rng(trial + 1);
    PhiEncoder phi(PhiVariant::Fc, ctx_dim, m, phi_rng);
    GlobalBias gb{Vec(m), 1.0, 0.0};
    for (double& v : gb.b_glo) v = rng.uniform(0.0, 2.0);
    Vec ctx(ctx_dim);
    for (double& v : ctx) v = rng.normal();
    Vec z(m);
    for (double& v : z) v = rng.uniform(-4.0, 4.0);
    std::size_t r_tru = rng.below(m);

    Vec init = phi_forward(phi, ctx);
    for (std::size_t j = 0; j < m; ++j) init[j] += gb.b_glo[j];

    CorrectionBias cb = construct_bias(z, ctx, phi, gb, r_tru, eps_c);

    Vec zhat(m);
    for (std::size_t j = 0; j < m; ++j) zhat[j] = z[j] + cb.b_tru[j];
    CHECK(argmax(zhat) == r_tru);
    CHECK(cb.margin >= 0.9 * eps_c);

    // Untouched coordinates keep the initialization exactly; the loop touches
    // only classes whose initial corrected logit reached the margin band.
    double init_true = z[r_tru] + init[r_tru];
    for (std::size_t j = 0; j < m; ++j) {
      bool offender = j != r_tru && z[j] + init[j] > init_true - eps_c;
      if (offender)
        CHECK(cb.b_tru[j] != init[j]);
      else
        CHECK(cb.b_tru[j] == init[j]);
    }
  }
}

TEST_CASE("construct bias rejects bad arguments") {
  PhiEncoder phi = zero_phi(4, 3);
  GlobalBias gb = zero_gb(3);
  Vec ctx(4, 0.0);
  CHECK_THROWS_AS(construct_bias({1, 2, 3}, ctx, phi, gb, 5, 1e-4), ContractViolation);
  CHECK_THROWS_AS(construct_bias({1, 2, 3}, ctx, phi, gb, 0, 0.0), ContractViolation);
}

TEST_CASE("batch set construction: order, determinism, freeze gate") {
  DatasetSpec spec;
  spec.m_classes = 4;
  spec.ctx_dim = 8;
  spec.zipf_s = 1.0;
  spec.n_train = 64;
  spec.n_test = 16;
  spec.group_size = 8;
  spec.noise_sigma = 0.3;
  spec.seed = 21;
  Dataset ds = generate(spec);
  Rng rng(1);
  ClassicModel model(8, 4, rng, 16);
  PhiEncoder phi = zero_phi(8, 4);
  GlobalBias gb = global_bias(ds.class_weights, 1.0, 0.001);

  std::vector<const Sample*> batch;
  for (std::size_t i = 0; i < 16; ++i) batch.push_back(&ds.train[i]);

  CHECK_THROWS_AS(build_batch_set(batch, model, phi, gb, 1e-4), FreezeViolation);

  model.freeze();
  CHECK(build_batch_set({}, model, phi, gb, 1e-4).empty());

  auto set1 = build_batch_set(batch, model, phi, gb, 1e-4);
  auto set2 = build_batch_set(batch, model, phi, gb, 1e-4);
  REQUIRE(set1.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(set1[i].r_tru == batch[i]->label);
    Vec z = model.logits(batch[i]->ctx);
    Vec zhat(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) zhat[j] = z[j] + set1[i].b_tru[j];
    CHECK(argmax(zhat) == batch[i]->label);
    CHECK(set1[i].b_tru == set2[i].b_tru);
  }
}

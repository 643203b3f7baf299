#include <doctest.h>

#include <cmath>

#include "sbp/errors.hpp"
#include "sbp/gradcheck.hpp"
#include "sbp/nn.hpp"
#include "sbp/optim.hpp"
#include "sbp/rng.hpp"

using namespace sbp;

namespace {

// Brute-force matrix multiply, independent of Dense::forward.
Tensor naive_matmul_bias(const Tensor& x, const Tensor& w, const Vec& b) {
  Tensor y = Tensor::zeros({x.dim(0), w.dim(1)});
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t o = 0; o < w.dim(1); ++o) {
      double acc = b[o];
      for (std::size_t j = 0; j < x.dim(1); ++j) acc += x.at(i, j) * w.at(j, o);
      y.at(i, o) = acc;
    }
  return y;
}

// Sliding-window cross-correlation with explicit zero padding.
Vec naive_conv1d(const Vec& x, const Vec& kernel, double bias) {
  std::size_t len = x.size(), ks = kernel.size();
  std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((ks - 1) / 2);
  Vec y(len, 0.0);
  for (std::size_t l = 0; l < len; ++l) {
    double acc = bias;
    for (std::size_t t = 0; t < ks; ++t) {
      std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + t) - pad;
      double xv = (src < 0 || src >= static_cast<std::ptrdiff_t>(len))
                      ? 0.0
                      : x[static_cast<std::size_t>(src)];
      acc += xv * kernel[t];
    }
    y[l] = acc;
  }
  return y;
}

Dense make_dense(std::size_t in, std::size_t out, const Vec& w_vals, const Vec& b_vals) {
  Rng rng(0);
  Dense d("d", in, out, rng);
  d.w.value.data = w_vals;
  d.b.value.data = b_vals;
  return d;
}

}  // namespace

TEST_CASE("dense forward identity and bias passthrough") {
  Dense d = make_dense(2, 2, {1, 0, 0, 1}, {0, 0});
  Tensor y = d.forward(Tensor({1, 2}, {1, 2}));
  CHECK(y.at(0, 0) == 1.0);
  CHECK(y.at(0, 1) == 2.0);

  Dense d2 = make_dense(2, 2, {0.5, -1, 2, 0.25}, {3, 4});
  Tensor y2 = d2.forward(Tensor({1, 2}, {0, 0}));
  CHECK(y2.at(0, 0) == 3.0);
  CHECK(y2.at(0, 1) == 4.0);
}

TEST_CASE("dense forward matches brute-force multiply") {
  Dense d = make_dense(2, 2, {1, 2, 3, 4}, {0, 0});
  Tensor x({1, 2}, {1, 1});
  Tensor y = d.forward(x);
  CHECK(y.at(0, 0) == 4.0);
  CHECK(y.at(0, 1) == 6.0);

  Rng rng(7);
  Tensor xr = Tensor::zeros({3, 5});
  for (double& v : xr.data) v = rng.normal();
  Dense dr("dr", 5, 4, rng);
  Tensor got = dr.forward(xr);
  Tensor want = naive_matmul_bias(xr, dr.w.value, dr.b.value.data);
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got.at(i) == doctest::Approx(want.at(i)).epsilon(1e-12));
}

TEST_CASE("dense forward rejects shape mismatch") {
  Rng rng(1);
  Dense d("d", 3, 2, rng);
  CHECK_THROWS_AS(d.forward(Tensor({1, 2}, {1, 2})), ContractViolation);
}

TEST_CASE("conv1d identity kernels") {
  Rng rng(0);
  Conv1d c1("c1", 1, 1, 1, rng);
  c1.k.value.data = {1.0};
  c1.b.value.data = {0.0};
  Tensor x({1, 1, 4}, {1, 2, 3, 4});
  Tensor y = c1.forward(x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.at(0, 0, i) == x.at(0, 0, i));

  Conv1d c3("c3", 1, 1, 3, rng);
  c3.k.value.data = {0.0, 1.0, 0.0};
  c3.b.value.data = {0.0};
  Tensor y3 = c3.forward(x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y3.at(0, 0, i) == x.at(0, 0, i));
}

TEST_CASE("conv1d matches sliding-window oracle") {
  Rng rng(0);
  Conv1d c("c", 1, 1, 3, rng);
  c.k.value.data = {1.0, 1.0, 1.0};
  c.b.value.data = {0.0};
  Tensor y = c.forward(Tensor({1, 1, 3}, {1, 2, 3}));
  CHECK(y.at(0, 0, 0) == 3.0);
  CHECK(y.at(0, 0, 1) == 6.0);
  CHECK(y.at(0, 0, 2) == 5.0);

  Rng r2(99);
  Conv1d cr("cr", 1, 1, 5, r2);
  Vec x(9);
  for (double& v : x) v = r2.normal();
  Tensor xt({1, 1, 9}, x);
  Tensor got = cr.forward(xt);
  Vec want = naive_conv1d(x, cr.k.value.data, cr.b.value.data[0]);
  for (std::size_t i = 0; i < 9; ++i)
    CHECK(got.at(0, 0, i) == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("conv1d rejects even kernel size") {
  Rng rng(0);
  CHECK_THROWS_AS(Conv1d("bad", 1, 1, 4, rng), ContractViolation);
}

TEST_CASE("leaky relu definition") {
  LeakyRelu zero_slope(0.0);
  Tensor y = zero_slope.forward(Tensor({2}, {1, -1}));
  CHECK(y.at(0) == 1.0);
  CHECK(y.at(1) == 0.0);

  LeakyRelu lr(0.2);
  Tensor y2 = lr.forward(Tensor({2}, {2, -2}));
  CHECK(y2.at(0) == 2.0);
  CHECK(y2.at(1) == doctest::Approx(-0.4));

  Tensor y3 = lr.forward(Tensor({1}, {0}));
  CHECK(y3.at(0) == 0.0);

  CHECK_THROWS_AS(LeakyRelu(1.0), ContractViolation);
}

TEST_CASE("softmax symmetry, shift invariance, derived value") {
  Vec p = softmax({0, 0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  Vec big = softmax({1000, 1000, 1000});
  for (double v : big) CHECK(v == doctest::Approx(1.0 / 3.0));

  // exp(1)/(exp(1)+1) evaluated independently at high precision
  Vec q = softmax({1, 0});
  CHECK(q[0] == doctest::Approx(0.7310585786300049).epsilon(1e-10));
  CHECK(q[1] == doctest::Approx(0.2689414213699951).epsilon(1e-10));
}

TEST_CASE("softmax sums to one and shifts cancel") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec z(2 + rng.below(8));
    for (double& v : z) v = rng.uniform(-30, 30);
    Vec p = softmax(z);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::fabs(sum - 1.0) <= 1e-12);

    double shift = rng.uniform(-100, 100);
    Vec zs = z;
    for (double& v : zs) v += shift;
    Vec ps = softmax(zs);
    for (std::size_t i = 0; i < p.size(); ++i)
      CHECK(std::fabs(p[i] - ps[i]) <= 1e-9);
  }
}

TEST_CASE("cross entropy values and gradient identity") {
  CrossEntropyResult r = cross_entropy({0, 0}, 0);
  CHECK(r.loss == doctest::Approx(std::log(2.0)));

  CrossEntropyResult dominant = cross_entropy({50, 0}, 0);
  CHECK(dominant.loss < 1e-9);

  // loss([1,0], t=1) = log(1+e) evaluated independently
  CrossEntropyResult derived = cross_entropy({1, 0}, 1);
  CHECK(derived.loss == doctest::Approx(1.3132616875182228).epsilon(1e-10));

  Vec z{0.3, -1.2, 2.0};
  CrossEntropyResult g = cross_entropy(z, 2);
  Vec p = softmax(z);
  CHECK(g.dloss_dz[0] == p[0]);
  CHECK(g.dloss_dz[1] == p[1]);
  CHECK(g.dloss_dz[2] == p[2] - 1.0);

  CHECK_THROWS_AS(cross_entropy({0, 0}, 2), ContractViolation);
}

TEST_CASE("sgd step basics and hand-traced descent") {
  Param p("p", Tensor({1}, {1.0}));
  p.grad.data[0] = 1.0;
  sgd_step({&p}, 0.1);
  CHECK(p.value.data[0] == doctest::Approx(0.9));
  CHECK(p.grad.data[0] == 0.0);

  sgd_step({&p}, 0.1);  // zero grad, no movement
  CHECK(p.value.data[0] == doctest::Approx(0.9));

  // two steps of lr=0.5 on f(w)=w^2 from w=1: grad=2w
  Param w("w", Tensor({1}, {1.0}));
  for (int i = 0; i < 2; ++i) {
    w.grad.data[0] = 2.0 * w.value.data[0];
    sgd_step({&w}, 0.5);
  }
  CHECK(w.value.data[0] == 0.0);
}

TEST_CASE("sgd rejects non-finite gradients") {
  Param p("p", Tensor({1}, {1.0}));
  p.grad.data[0] = std::nan("");
  CHECK_THROWS_AS(sgd_step({&p}, 0.1), TrainingDivergence);
}

TEST_CASE("rmsprop step: derived value, zero grad, scale invariance") {
  Param p("p", Tensor({1}, {0.0}));
  p.grad.data[0] = 1.0;
  rmsprop_step({&p}, 0.01, 0.9, 0.0);
  // v = 0.1, step = 0.01/sqrt(0.1)
  CHECK(p.value.data[0] == doctest::Approx(-0.01 / std::sqrt(0.1)).epsilon(1e-12));
  CHECK(p.grad.data[0] == 0.0);

  Param q("q", Tensor({1}, {5.0}));
  q.opt_state.data[0] = 1.0;
  rmsprop_step({&q}, 0.01, 0.9, 1e-8);  // grad 0: value unchanged, v decays
  CHECK(q.value.data[0] == 5.0);
  CHECK(q.opt_state.data[0] == doctest::Approx(0.9));

  // step magnitude is independent of |grad| when v starts at 0 and eps=0
  Param a("a", Tensor({1}, {0.0})), b("b", Tensor({1}, {0.0}));
  a.grad.data[0] = 0.37;
  b.grad.data[0] = 0.74;
  rmsprop_step({&a}, 0.01, 0.9, 0.0);
  rmsprop_step({&b}, 0.01, 0.9, 0.0);
  CHECK(std::fabs(a.value.data[0]) == doctest::Approx(std::fabs(b.value.data[0])).epsilon(1e-12));

  CHECK_THROWS_AS(rmsprop_step({&a}, 0.01, 1.5, 0.0), ContractViolation);
}

TEST_CASE("optimizers keep opt_state shapes and zero grads") {
  Rng rng(4);
  Dense d("d", 3, 2, rng);
  d.w.grad.fill(0.5);
  d.b.grad.fill(0.25);
  ParamRefs params{&d.w, &d.b};
  rmsprop_step(params, 0.001, 0.9, 1e-8);
  for (Param* p : params) {
    CHECK(p->opt_state.shape == p->value.shape);
    CHECK(p->grad.shape == p->value.shape);
    for (double g : p->grad.data) CHECK(g == 0.0);
  }
}

TEST_CASE("clip params clamps values") {
  Param p("p", Tensor({2}, {0.5, -0.02}));
  clip_params({&p}, 0.01);
  CHECK(p.value.data[0] == 0.01);
  CHECK(p.value.data[1] == -0.01);

  Param q("q", Tensor({2}, {0.005, -0.002}));
  clip_params({&q}, 0.01);
  CHECK(q.value.data[0] == 0.005);
  CHECK(q.value.data[1] == -0.002);

  Rng rng(5);
  Tensor big = Tensor::zeros({1000});
  for (double& v : big.data) v = rng.normal();
  Param r("r", big);
  clip_params({&r}, 0.01);
  double max_abs = 0.0;
  for (double v : r.value.data) max_abs = std::max(max_abs, std::fabs(v));
  CHECK(max_abs == 0.01);

  CHECK_THROWS_AS(clip_params({&r}, 0.0), ContractViolation);
}

TEST_CASE("finite diff check on w^2") {
  Param w("w", Tensor({1}, {3.0}));
  auto loss_fn = [&] { return w.value.data[0] * w.value.data[0]; };
  auto grad_fn = [&] {
    w.grad.fill(0.0);
    w.grad.data[0] = 2.0 * w.value.data[0];
  };
  GradCheckResult r = finite_diff_check(loss_fn, grad_fn, {&w}, 1e-5);
  CHECK(r.max_rel_err < 1e-9);
  CHECK_THROWS_AS(finite_diff_check(loss_fn, grad_fn, {&w}, 1e-2), ContractViolation);
}

TEST_CASE("finite diff check names a corrupted gradient") {
  Rng rng(6);
  Dense d("layer7", 3, 2, rng);
  Tensor x = Tensor::zeros({2, 3});
  for (double& v : x.data) v = rng.normal();
  std::vector<std::size_t> labels{0, 1};
  auto loss_fn = [&] { return mean_cross_entropy(d.forward(x), labels).loss; };
  auto grad_fn = [&] {
    zero_grads({&d.w, &d.b});
    BatchCrossEntropyResult ce = mean_cross_entropy(d.forward(x), labels);
    d.backward(ce.dloss_dz);
    d.b.grad.data[0] += 0.5;  // sabotage
  };
  GradCheckResult r = finite_diff_check(loss_fn, grad_fn, {&d.w, &d.b}, 1e-5);
  CHECK(r.max_rel_err > 1e-2);
  CHECK(r.worst_param == "layer7.b[0]");
}

TEST_CASE("rng determinism and splitting") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42);
  Rng child1 = c.split(1);
  Rng d(42);
  Rng child2 = d.split(1);
  for (int i = 0; i < 10; ++i) CHECK(child1.next_u64() == child2.next_u64());

  Rng e(42);
  Rng other = e.split(2);
  bool all_same = true;
  Rng f(42);
  Rng base = f.split(1);
  for (int i = 0; i < 10; ++i) all_same = all_same && (other.next_u64() == base.next_u64());
  CHECK_FALSE(all_same);
}

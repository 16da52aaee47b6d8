#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mcunet/mri_ops.hpp"
#include "test_helpers.hpp"

using namespace mcu;
using mcu::testing::grad_check;
using mcu::testing::randn;

namespace {

// loss with a fixed random projection so gradients are direction-sensitive;
// the projection is derived from the tag so rebuilding the graph for finite
// differences sees the identical function
ad::Var proj_loss(const ad::Var& v, const char* tag) {
  Rng rng(derive_seed(977, tag));
  Tensor w(v->value.shape());
  for (std::size_t i = 0; i < static_cast<std::size_t>(w.numel()); ++i) w[i] = rng.normal();
  return ad::sum_v(ad::mul(v, ad::constant(w)));
}

}  // namespace

TEST_CASE("reverse-mode gradients match central differences for arithmetic ops") {
  Rng rng(derive_seed(401, "gc-arith"));
  Tensor a = randn(rng, {3, 4, 4});
  Tensor b = randn(rng, {3, 4, 4});
  for (std::size_t i = 0; i < static_cast<std::size_t>(b.numel()); ++i)
    b[i] += (b[i] >= 0 ? 2.0 : -2.0);  // keep divisors away from zero
  Tensor s = Tensor::scalar(0.7);

  auto run = [&](const char* what, mcu::testing::GraphFn fn) {
    Rng r2(derive_seed(402, what));
    auto res = grad_check({&a, &b, &s}, fn, r2);
    INFO(what);
    CHECK(res.max_rel_err < 1e-3);
  };
  run("add", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::add(p[0], p[1]), "add");
  });
  run("sub", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::sub(p[0], p[1]), "sub");
  });
  run("mul", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::mul(p[0], p[1]), "mul");
  });
  run("div", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::div(p[0], p[1]), "div");
  });
  run("scale+add_const", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::add_const(ad::scale(p[0], -1.7), 0.3), "scale+add_const");
  });
  run("smul", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::smul(p[2], p[0]), "smul");
  });
  run("reductions", [&](const std::vector<ad::Var>& p) {
    return ad::add(ad::add(ad::sum_sq(p[0]), ad::mean_v(p[1])), ad::sum_v(p[0]));
  });
}

TEST_CASE("reverse-mode gradients match central differences for nonlinearities") {
  Rng rng(derive_seed(404, "gc-nonlin"));
  Tensor a = randn(rng, {2, 5, 5});
  Tensor t = Tensor::scalar(0.4);
  // keep |a| away from the shrinkage kink at |x| = t
  for (std::size_t i = 0; i < static_cast<std::size_t>(a.numel()); ++i)
    if (std::abs(std::abs(a[i]) - t[0]) < 2e-2) a[i] += 5e-2;

  auto run = [&](const char* what, mcu::testing::GraphFn fn) {
    Rng r2(derive_seed(406, what));
    auto res = grad_check({&a, &t}, fn, r2);
    INFO(what);
    CHECK(res.max_rel_err < 1e-3);
  };
  run("sigmoid", [&](const std::vector<ad::Var>& p) { return proj_loss(ad::sigmoid(p[0]), "sigmoid"); });
  run("tanh", [&](const std::vector<ad::Var>& p) { return proj_loss(ad::tanh_v(p[0]), "tanh"); });
  run("softplus", [&](const std::vector<ad::Var>& p) { return proj_loss(ad::softplus(p[0]), "softplus"); });
  run("relu", [&](const std::vector<ad::Var>& p) { return proj_loss(ad::relu(p[0]), "relu"); });
  run("soft_threshold", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::soft_threshold(p[0], p[1]), "soft_threshold");
  });
  run("magnitude", [&](const std::vector<ad::Var>& p) { return proj_loss(ad::magnitude(p[0]), "magnitude"); });
}

TEST_CASE("negative shrinkage threshold is rejected") {
  Tensor x = Tensor::full({1, 2, 2}, 1.0);
  CHECK_THROWS_AS(ad::soft_threshold(ad::constant(x), ad::constant(Tensor::scalar(-0.1))),
                  std::invalid_argument);
}

TEST_CASE("reverse-mode gradients match central differences for structure ops") {
  Rng rng(derive_seed(407, "gc-struct"));
  Tensor x = randn(rng, {2, 6, 5});
  Tensor w = randn(rng, {3, 2, 3, 3}, 0.5);
  Tensor b = randn(rng, {3}, 0.1);
  auto run = [&](const char* what, mcu::testing::GraphFn fn) {
    Rng r2(derive_seed(409, what));
    auto res = grad_check({&x, &w, &b}, fn, r2);
    INFO(what);
    CHECK(res.max_rel_err < 1e-3);
  };
  run("conv2d", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::conv2d(p[0], p[1], p[2]), "conv2d");
  });
  run("maxpool2", [&](const std::vector<ad::Var>& p) { return proj_loss(ad::maxpool2(p[0]), "maxpool2"); });
  run("upsample_to", [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::upsample_to(p[0], 9, 8), "upsample_to");
  });
  run("concat+slice", [&](const std::vector<ad::Var>& p) {
    ad::Var c = ad::concat_ch({p[0], ad::relu(p[0])});
    return proj_loss(ad::slice_ch(c, 1, 3), "concat+slice");
  });
  run("conf_blend", [&](const std::vector<ad::Var>& p) {
    ad::Var m = ad::sigmoid(ad::slice_ch(p[0], 0, 1));
    return proj_loss(ad::conf_blend(p[0], ad::scale(p[0], -0.5), m), "conf_blend");
  });
}

TEST_CASE("reverse-mode gradients match central differences through the encoding chain") {
  Rng rng(derive_seed(410, "gc-mri"));
  const int c = 2, h = 6, w = 6;
  Tensor csm = randn(rng, {c, 2, h, w});
  Tensor mask({h, w});
  for (std::size_t i = 0; i < static_cast<std::size_t>(mask.numel()); ++i)
    mask[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  Tensor meas = randn(rng, {c, 2, h, w});
  Tensor x = randn(rng, {2, h, w});
  Tensor k = randn(rng, {c, 2, h, w});
  Tensor mu = Tensor::scalar(0.8);

  auto run = [&](const char* what, std::vector<Tensor*> ps, mcu::testing::GraphFn fn) {
    Rng r2(derive_seed(412, what));
    auto res = grad_check(std::move(ps), fn, r2);
    INFO(what);
    CHECK(res.max_rel_err < 1e-3);
  };
  run("forward_model", {&x}, [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::forward_model_v(p[0], csm, mask), "forward_model");
  });
  run("adjoint_model", {&k}, [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::adjoint_model_v(p[0], csm, mask), "adjoint_model");
  });
  run("dc_project", {&x, &mu}, [&](const std::vector<ad::Var>& p) {
    return proj_loss(ad::dc_project_v(p[0], meas, csm, mask, p[1]), "dc_project");
  });
}

TEST_CASE("gradients accumulate correctly when a node is reused") {
  Rng rng(derive_seed(413, "gc-reuse"));
  Tensor x = randn(rng, {2, 3, 3});
  auto fn = [](const std::vector<ad::Var>& p) {
    ad::Var sq = ad::mul(p[0], p[0]);
    return ad::add(ad::sum_sq(sq), ad::sum_v(ad::mul(sq, p[0])));
  };
  Rng r2(derive_seed(414, "gc-reuse2"));
  auto res = grad_check({&x}, fn, r2);
  CHECK(res.max_rel_err < 1e-3);

  // analytic: d/dx of (sum x^4 + sum x^3) = 4x^3 + 3x^2
  std::vector<ad::Var> vars{ad::param(x)};
  ad::backward(fn(vars));
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.numel()); ++i) {
    double want = 4.0 * x[i] * x[i] * x[i] + 3.0 * x[i] * x[i];
    CHECK(vars[0]->grad[i] == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("backward is deterministic: identical graphs give bit-identical gradients") {
  Rng rng(derive_seed(415, "gc-det"));
  Tensor x = randn(rng, {2, 8, 8});
  Tensor w = randn(rng, {4, 2, 3, 3});
  Tensor b = randn(rng, {4});
  auto build = [&]() {
    auto vx = ad::param(x);
    auto vw = ad::param(w);
    auto vb = ad::param(b);
    ad::backward(ad::sum_sq(ad::maxpool2(ad::relu(ad::conv2d(vx, vw, vb)))));
    return std::tuple{vx, vw, vb};
  };
  auto [x1, w1, b1] = build();
  auto [x2, w2, b2] = build();
  CHECK(mcu::testing::bitwise_equal(x1->grad, x2->grad));
  CHECK(mcu::testing::bitwise_equal(w1->grad, w2->grad));
  CHECK(mcu::testing::bitwise_equal(b1->grad, b2->grad));
}

#include <doctest.h>

#include <cmath>
#include <complex>
#include <tuple>

#include "mcunet/mri_ops.hpp"
#include "test_helpers.hpp"

using namespace mcu;
using mcu::testing::max_diff;
using mcu::testing::normalized_csm;
using mcu::testing::randn;
using mcu::testing::random_mask;

TEST_CASE("complex product against std::complex") {
  Rng rng(derive_seed(301, "test-cmul"));
  Tensor a = randn(rng, {2, 3, 3});
  Tensor b = randn(rng, {2, 3, 3});
  Tensor ab = complex_mul(a, b);
  Tensor abc = complex_mul(a, b, true);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      std::complex<double> za(a.at(0, i, j), a.at(1, i, j));
      std::complex<double> zb(b.at(0, i, j), b.at(1, i, j));
      auto zp = za * zb;
      auto zq = za * std::conj(zb);
      CHECK(ab.at(0, i, j) == doctest::Approx(zp.real()).epsilon(1e-14));
      CHECK(ab.at(1, i, j) == doctest::Approx(zp.imag()).epsilon(1e-14));
      CHECK(abc.at(0, i, j) == doctest::Approx(zq.real()).epsilon(1e-14));
      CHECK(abc.at(1, i, j) == doctest::Approx(zq.imag()).epsilon(1e-14));
    }
}

TEST_CASE("coil expansion and reduction are adjoint") {
  Rng rng(derive_seed(302, "test-expand-adjoint"));
  const int c = 4, h = 8, w = 6;
  Tensor csm = randn(rng, {c, 2, h, w});
  Tensor x = randn(rng, {2, h, w});
  Tensor z = randn(rng, {c, 2, h, w});
  CHECK(dot(expand(x, csm), z) == doctest::Approx(dot(x, reduce(z, csm))).epsilon(1e-12));
}

TEST_CASE("reduction inverts expansion under unit-norm sensitivities") {
  Rng rng(derive_seed(303, "test-expand-inverse"));
  const int c = 6, h = 10, w = 10;
  Tensor csm = normalized_csm(rng, c, h, w);
  Tensor x = randn(rng, {2, h, w});
  CHECK(max_diff(reduce(expand(x, csm), csm), x) < 1e-12);
}

TEST_CASE("sampling projector is idempotent and self-adjoint") {
  Rng rng(derive_seed(304, "test-mask"));
  const int c = 3, h = 8, w = 8;
  Tensor mask = random_mask(rng, h, w, 0.4);
  Tensor y = randn(rng, {c, 2, h, w});
  Tensor z = randn(rng, {c, 2, h, w});
  CHECK(max_diff(apply_mask(apply_mask(y, mask), mask), apply_mask(y, mask)) == 0.0);
  CHECK(dot(apply_mask(y, mask), z) == doctest::Approx(dot(y, apply_mask(z, mask))).epsilon(1e-12));
}

TEST_CASE("encoding operator and its adjoint satisfy the inner-product identity") {
  Rng rng(derive_seed(305, "test-model-adjoint"));
  for (auto [c, h, w] : {std::tuple{1, 16, 16}, {4, 16, 16}, {4, 32, 32}}) {
    Tensor csm = randn(rng, {c, 2, h, w});
    Tensor mask = random_mask(rng, h, w, 0.3);
    Tensor x = randn(rng, {2, h, w});
    Tensor y = randn(rng, {c, 2, h, w});
    double lhs = dot(forward_model(x, csm, mask), y);
    double rhs = dot(x, adjoint_model(y, csm, mask));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("soft data consistency blends sampled entries only") {
  Rng rng(derive_seed(306, "test-dc"));
  const int c = 2, h = 6, w = 6;
  Tensor mask = random_mask(rng, h, w, 0.5);
  Tensor pred = randn(rng, {c, 2, h, w});
  Tensor meas = randn(rng, {c, 2, h, w});

  CHECK(max_diff(dc_blend(pred, meas, mask, 0.0), pred) == 0.0);

  const double mu = 1.7;
  Tensor out = dc_blend(pred, meas, mask, mu);
  for (int ic = 0; ic < c; ++ic)
    for (int ch = 0; ch < 2; ++ch)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          double p = pred.at(ic, ch, i, j), m = meas.at(ic, ch, i, j);
          double want = mask.at(i, j) != 0.0 ? (p + mu * m) / (1.0 + mu) : p;
          CHECK(out.at(ic, ch, i, j) == doctest::Approx(want).epsilon(1e-15));
        }

  // large mu pushes sampled entries onto the measurements
  Tensor hard = dc_blend(pred, meas, mask, 1e12);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (mask.at(i, j) != 0.0)
        CHECK(hard.at(0, 0, i, j) == doctest::Approx(meas.at(0, 0, i, j)).epsilon(1e-9));
}

TEST_CASE("a consistent image is a fixed point of the data-consistency projection") {
  Rng rng(derive_seed(307, "test-dc-fixed"));
  const int c = 4, h = 12, w = 12;
  Tensor csm = normalized_csm(rng, c, h, w);
  Tensor mask = random_mask(rng, h, w, 0.4);
  Tensor x = randn(rng, {2, h, w});
  Tensor y = forward_model(x, csm, mask);
  CHECK(max_diff(dc_project(x, y, csm, mask, 3.0), x) < 1e-10);
}

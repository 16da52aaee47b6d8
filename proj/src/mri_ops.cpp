#include "mcunet/mri_ops.hpp"

#include <algorithm>

#include "mcunet/fft.hpp"

namespace mcu {

namespace {

void check_image(const Tensor& x, const char* who) {
  require(x.ndim() == 3 && x.dim(0) == 2,
          std::string(who) + ": expected [2,H,W], got " + x.shape_str());
}

void check_coils(const Tensor& x, const char* who) {
  require(x.ndim() == 4 && x.dim(1) == 2,
          std::string(who) + ": expected [C,2,H,W], got " + x.shape_str());
}

}  // namespace

Tensor complex_mul(const Tensor& a, const Tensor& b, bool conj_b) {
  check_image(a, "complex_mul");
  require(a.same_shape(b), "complex_mul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  const std::size_t n = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
  Tensor out(a.shape());
  const double *ar = a.data(), *ai = a.data() + n;
  const double *br = b.data(), *bi = b.data() + n;
  double *cr = out.data(), *ci = out.data() + n;
  const double sgn = conj_b ? -1.0 : 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cr[k] = ar[k] * br[k] - sgn * ai[k] * bi[k];
    ci[k] = sgn * ar[k] * bi[k] + ai[k] * br[k];
  }
  return out;
}

Tensor expand(const Tensor& image, const Tensor& csm) {
  check_image(image, "expand");
  check_coils(csm, "expand");
  const int c = csm.dim(0), h = csm.dim(2), w = csm.dim(3);
  require(image.dim(1) == h && image.dim(2) == w, "expand: image/csm size mismatch");
  const std::size_t n = static_cast<std::size_t>(h) * w;
  Tensor out(csm.shape());
  const double *xr = image.data(), *xi = image.data() + n;
  for (int ic = 0; ic < c; ++ic) {
    const double* sr = csm.data() + static_cast<std::size_t>(ic) * 2 * n;
    const double* si = sr + n;
    double* yr = out.data() + static_cast<std::size_t>(ic) * 2 * n;
    double* yi = yr + n;
    for (std::size_t k = 0; k < n; ++k) {
      yr[k] = xr[k] * sr[k] - xi[k] * si[k];
      yi[k] = xr[k] * si[k] + xi[k] * sr[k];
    }
  }
  return out;
}

Tensor reduce(const Tensor& coils, const Tensor& csm) {
  check_coils(coils, "reduce");
  require(coils.same_shape(csm), "reduce: coil/csm shape mismatch");
  const int c = csm.dim(0), h = csm.dim(2), w = csm.dim(3);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  Tensor out({2, h, w});
  double *xr = out.data(), *xi = out.data() + n;
  for (int ic = 0; ic < c; ++ic) {
    const double* yr = coils.data() + static_cast<std::size_t>(ic) * 2 * n;
    const double* yi = yr + n;
    const double* sr = csm.data() + static_cast<std::size_t>(ic) * 2 * n;
    const double* si = sr + n;
    for (std::size_t k = 0; k < n; ++k) {
      xr[k] += yr[k] * sr[k] + yi[k] * si[k];
      xi[k] += yi[k] * sr[k] - yr[k] * si[k];
    }
  }
  return out;
}

Tensor apply_mask(const Tensor& kspace, const Tensor& mask) {
  check_coils(kspace, "apply_mask");
  require_shape(mask, {kspace.dim(2), kspace.dim(3)}, "apply_mask mask");
  const std::size_t n = static_cast<std::size_t>(mask.numel());
  Tensor out(kspace.shape());
  const double* m = mask.data();
  for (int ic = 0; ic < kspace.dim(0); ++ic)
    for (int ch = 0; ch < 2; ++ch) {
      const double* src = kspace.data() + (static_cast<std::size_t>(ic) * 2 + ch) * n;
      double* dst = out.data() + (static_cast<std::size_t>(ic) * 2 + ch) * n;
      for (std::size_t k = 0; k < n; ++k) dst[k] = src[k] * m[k];
    }
  return out;
}

namespace {

Tensor per_coil(const Tensor& coils, Tensor (*op)(const Tensor&)) {
  check_coils(coils, "per-coil transform");
  const int c = coils.dim(0), h = coils.dim(2), w = coils.dim(3);
  const std::size_t sz = static_cast<std::size_t>(2) * h * w;
  Tensor out(coils.shape());
  for (int ic = 0; ic < c; ++ic) {
    Tensor one({2, h, w});
    std::copy(coils.data() + ic * sz, coils.data() + (ic + 1) * sz, one.data());
    Tensor r = op(one);
    std::copy(r.data(), r.data() + sz, out.data() + ic * sz);
  }
  return out;
}

}  // namespace

Tensor fft2c_coils(const Tensor& coils) { return per_coil(coils, &fft2c); }

Tensor ifft2c_coils(const Tensor& coils) { return per_coil(coils, &ifft2c); }

Tensor forward_model(const Tensor& image, const Tensor& csm, const Tensor& mask) {
  return apply_mask(fft2c_coils(expand(image, csm)), mask);
}

Tensor adjoint_model(const Tensor& kspace, const Tensor& csm, const Tensor& mask) {
  return reduce(ifft2c_coils(apply_mask(kspace, mask)), csm);
}

Tensor dc_blend(const Tensor& pred, const Tensor& meas, const Tensor& mask, double mu) {
  check_coils(pred, "dc_blend");
  require(pred.same_shape(meas), "dc_blend: pred/meas shape mismatch");
  require_shape(mask, {pred.dim(2), pred.dim(3)}, "dc_blend mask");
  require(mu >= 0.0, "dc_blend: mu must be nonnegative");
  const std::size_t n = static_cast<std::size_t>(mask.numel());
  const double* m = mask.data();
  const double inv = 1.0 / (1.0 + mu);
  Tensor out(pred.shape());
  for (int ic = 0; ic < pred.dim(0); ++ic)
    for (int ch = 0; ch < 2; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(ic) * 2 + ch) * n;
      const double* p = pred.data() + off;
      const double* y = meas.data() + off;
      double* d = out.data() + off;
      for (std::size_t k = 0; k < n; ++k)
        d[k] = m[k] != 0.0 ? (p[k] + mu * y[k]) * inv : p[k];
    }
  return out;
}

Tensor dc_project(const Tensor& image, const Tensor& meas, const Tensor& csm, const Tensor& mask,
                  double mu) {
  Tensor k = fft2c_coils(expand(image, csm));
  return reduce(ifft2c_coils(dc_blend(k, meas, mask, mu)), csm);
}

}  // namespace mcu

#pragma once

#include "mcunet/tensor.hpp"

// Multi-coil MRI encoding chain. Complex images are [2,H,W] (channel 0 real,
// channel 1 imaginary), coil stacks and k-space are [C,2,H,W], the sampling
// mask is a real binary [H,W] shared across coils.

namespace mcu {

// Pointwise complex product of two [2,H,W] images; conj_b conjugates the
// second factor.
Tensor complex_mul(const Tensor& a, const Tensor& b, bool conj_b = false);

// Coil expansion E: multiply the image by each coil sensitivity.
Tensor expand(const Tensor& image, const Tensor& csm);

// Coil reduction E*: conjugate-sensitivity weighted sum over coils.
Tensor reduce(const Tensor& coils, const Tensor& csm);

// Zero unsampled k-space positions (P or P*; the projector is idempotent).
Tensor apply_mask(const Tensor& kspace, const Tensor& mask);

Tensor fft2c_coils(const Tensor& coils);
Tensor ifft2c_coils(const Tensor& coils);

// A = P F E and A* = E* F^-1 P.
Tensor forward_model(const Tensor& image, const Tensor& csm, const Tensor& mask);
Tensor adjoint_model(const Tensor& kspace, const Tensor& csm, const Tensor& mask);

// Soft data consistency in k-space: sampled entries relax toward the
// measurements with weight mu, unsampled entries pass through:
//   out(m) = pred(m)                        m unsampled
//   out(m) = (pred(m) + mu*meas(m))/(1+mu)  m sampled
Tensor dc_blend(const Tensor& pred, const Tensor& meas, const Tensor& mask, double mu);

// Image-space wrapper: encode, blend against the measurements, decode.
Tensor dc_project(const Tensor& image, const Tensor& meas, const Tensor& csm, const Tensor& mask,
                  double mu);

}  // namespace mcu

#pragma once

#include "mcunet/tensor.hpp"

namespace mcu {

// Centered orthonormal Fourier transforms. fft2c(x) computes
// fftshift(FFT(ifftshift(x)))/sqrt(HW) on an image [2,H,W]; ifft2c is its
// exact unitary inverse (and therefore also its adjoint). fft1c/ifft1c are the
// length-N equivalents on [2,N]. Backed by FFTW with a process-wide plan cache.
Tensor fft2c(const Tensor& x);
Tensor ifft2c(const Tensor& x);
Tensor fft1c(const Tensor& x);
Tensor ifft1c(const Tensor& x);

}  // namespace mcu

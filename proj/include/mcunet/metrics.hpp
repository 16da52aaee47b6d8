#pragma once

#include <vector>

#include "mcunet/tensor.hpp"

// Image-quality metrics on magnitude images. Reconstructions are compared
// after taking |.|, so a global phase rotation of the complex image leaves
// every metric unchanged.

namespace mcu::metrics {

Tensor magnitude_image(const Tensor& img);  // [2,h,w] -> [h,w]

// 10*log10(range^2 / MSE) over matching magnitude images; an exact match
// reports +infinity. data_range convention: max magnitude of the reference.
double psnr(const Tensor& x, const Tensor& ref, double data_range);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01, k2 = 0.03;
};

// Mean local SSIM over fully interior windows, Gaussian-weighted statistics.
// Images smaller than the window are a validation error.
double ssim(const Tensor& x, const Tensor& ref, double data_range, const SsimParams& p = {});

// Normalized size x size Gaussian taps, row-major.
std::vector<double> gaussian_window(int size, double sigma);

// Complex wrappers: magnitude both arguments, data_range = max |ref|.
double psnr_complex(const Tensor& x, const Tensor& ref);
double ssim_complex(const Tensor& x, const Tensor& ref, const SsimParams& p = {});

}  // namespace mcu::metrics

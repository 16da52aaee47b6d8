#include "mcunet/metrics.hpp"

#include <cmath>
#include <limits>

namespace mcu::metrics {

Tensor magnitude_image(const Tensor& img) {
  require(img.ndim() == 3 && img.dim(0) == 2, "magnitude_image: expected [2,h,w]");
  const int h = img.dim(1), w = img.dim(2);
  Tensor out({h, w});
  const std::int64_t n = static_cast<std::int64_t>(h) * w;
  for (std::int64_t i = 0; i < n; ++i) out[i] = std::hypot(img[i], img[n + i]);
  return out;
}

double psnr(const Tensor& x, const Tensor& ref, double data_range) {
  require(x.same_shape(ref), "psnr: shape mismatch " + x.shape_str() + " vs " + ref.shape_str());
  require(data_range > 0.0, "psnr: data_range must be positive");
  double mse = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    double d = x[i] - ref[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

std::vector<double> gaussian_window(int size, double sigma) {
  require(size >= 1 && sigma > 0.0, "gaussian_window: bad parameters");
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  double c = (size - 1) / 2.0, sum = 0.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      double v = std::exp(-d2 / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>(i) * size + j] = v;
      sum += v;
    }
  for (double& v : w) v /= sum;
  return w;
}

double ssim(const Tensor& x, const Tensor& ref, double data_range, const SsimParams& p) {
  require(x.same_shape(ref), "ssim: shape mismatch " + x.shape_str() + " vs " + ref.shape_str());
  require(x.ndim() == 2, "ssim: expected [h,w] magnitude images");
  require(data_range > 0.0, "ssim: data_range must be positive");
  const int h = x.dim(0), w = x.dim(1), win = p.window;
  require(h >= win && w >= win,
          "ssim: image " + x.shape_str() + " smaller than the " + std::to_string(win) + " window");

  std::vector<double> g = gaussian_window(win, p.sigma);
  const double c1 = (p.k1 * data_range) * (p.k1 * data_range);
  const double c2 = (p.k2 * data_range) * (p.k2 * data_range);

  double total = 0.0;
  for (int i0 = 0; i0 + win <= h; ++i0)
    for (int j0 = 0; j0 + win <= w; ++j0) {
      double mux = 0.0, muy = 0.0, ex2 = 0.0, ey2 = 0.0, exy = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          double wt = g[static_cast<std::size_t>(i) * win + j];
          double a = x.at(i0 + i, j0 + j), b = ref.at(i0 + i, j0 + j);
          mux += wt * a;
          muy += wt * b;
          ex2 += wt * a * a;
          ey2 += wt * b * b;
          exy += wt * a * b;
        }
      double sx2 = ex2 - mux * mux, sy2 = ey2 - muy * muy, sxy = exy - mux * muy;
      total += ((2.0 * mux * muy + c1) * (2.0 * sxy + c2)) /
               ((mux * mux + muy * muy + c1) * (sx2 + sy2 + c2));
    }
  return total / (static_cast<double>(h - win + 1) * (w - win + 1));
}

double psnr_complex(const Tensor& x, const Tensor& ref) {
  Tensor mr = magnitude_image(ref);
  return psnr(magnitude_image(x), mr, max_abs(mr));
}

double ssim_complex(const Tensor& x, const Tensor& ref, const SsimParams& p) {
  Tensor mr = magnitude_image(ref);
  return ssim(magnitude_image(x), mr, max_abs(mr), p);
}

}  // namespace mcu::metrics

#include "mcunet/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace mcu {

namespace {

// FFTW planning is not thread-safe; execution via the new-array interface is.
// Plans are created with FFTW_UNALIGNED so they stay valid for any buffer.
class PlanCache {
public:
  fftw_plan get(int h, int w, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(h, w, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<std::complex<double>> tmp(static_cast<std::size_t>(h) * w);
    auto* buf = reinterpret_cast<fftw_complex*>(tmp.data());
    fftw_plan p = fftw_plan_dft_2d(h, w, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    require(p != nullptr, "fftw plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

private:
  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

// Shift offsets: ifftshift rotates by floor(n/2), fftshift by ceil(n/2).
Tensor centered_fft(const Tensor& x, int h, int w, int sign) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const double* re = x.data();
  const double* im = x.data() + n;
  std::vector<std::complex<double>> buf(n);
  const int ih = h / 2, iw = w / 2;
  for (int i = 0; i < h; ++i) {
    int si = (i + ih) % h;
    for (int j = 0; j < w; ++j) {
      int sj = (j + iw) % w;
      std::size_t s = static_cast<std::size_t>(si) * w + sj;
      buf[static_cast<std::size_t>(i) * w + j] = {re[s], im[s]};
    }
  }
  auto* raw = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(cache().get(h, w, sign), raw, raw);
  Tensor out(x.shape());
  double* ore = out.data();
  double* oim = out.data() + n;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const int fh = (h + 1) / 2, fw = (w + 1) / 2;
  for (int i = 0; i < h; ++i) {
    int si = (i + fh) % h;
    for (int j = 0; j < w; ++j) {
      int sj = (j + fw) % w;
      std::size_t s = static_cast<std::size_t>(si) * w + sj;
      std::size_t d = static_cast<std::size_t>(i) * w + j;
      ore[d] = buf[s].real() * scale;
      oim[d] = buf[s].imag() * scale;
    }
  }
  return out;
}

}  // namespace

Tensor fft2c(const Tensor& x) {
  require(x.ndim() == 3 && x.dim(0) == 2, "fft2c: expected [2,H,W], got " + x.shape_str());
  return centered_fft(x, x.dim(1), x.dim(2), FFTW_FORWARD);
}

Tensor ifft2c(const Tensor& x) {
  require(x.ndim() == 3 && x.dim(0) == 2, "ifft2c: expected [2,H,W], got " + x.shape_str());
  return centered_fft(x, x.dim(1), x.dim(2), FFTW_BACKWARD);
}

Tensor fft1c(const Tensor& x) {
  require(x.ndim() == 2 && x.dim(0) == 2, "fft1c: expected [2,N], got " + x.shape_str());
  return centered_fft(x, 1, x.dim(1), FFTW_FORWARD);
}

Tensor ifft1c(const Tensor& x) {
  require(x.ndim() == 2 && x.dim(0) == 2, "ifft1c: expected [2,N], got " + x.shape_str());
  return centered_fft(x, 1, x.dim(1), FFTW_BACKWARD);
}

}  // namespace mcu

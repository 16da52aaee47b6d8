#include "mcunet/tensor.hpp"

#include <cmath>

namespace mcu {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_shape(const Tensor& t, const std::vector<int>& shape, const std::string& who) {
  if (t.shape() != shape) {
    Tensor want(shape.empty() ? std::vector<int>{1} : shape);
    throw std::invalid_argument(who + ": expected shape " + want.shape_str() + ", got " +
                                t.shape_str());
  }
}

void require_finite(const Tensor& t, const std::string& who) {
  const double* p = t.data();
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(p[i])) throw std::invalid_argument(who + ": non-finite input");
  }
}

double dot(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "dot: shape mismatch");
  double s = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

}  // namespace mcu

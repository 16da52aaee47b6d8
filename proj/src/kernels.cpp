#include "mcunet/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace mcu::kernels {

namespace {

inline double conv_cell(const ConvShape& s, const double* in, const double* w, const double* b,
                        int oc, int i, int j) {
  const int ph = s.pad_h(), pw = s.pad_w();
  double acc = b ? b[oc] : 0.0;
  for (int ic = 0; ic < s.cin; ++ic) {
    const double* inc = in + static_cast<std::size_t>(ic) * s.h * s.w;
    const double* wk = w + (static_cast<std::size_t>(oc) * s.cin + ic) * s.kh * s.kw;
    for (int ki = 0; ki < s.kh; ++ki) {
      int ii = i + ki - ph;
      if (ii < 0 || ii >= s.h) continue;
      for (int kj = 0; kj < s.kw; ++kj) {
        int jj = j + kj - pw;
        if (jj < 0 || jj >= s.w) continue;
        acc += inc[ii * s.w + jj] * wk[ki * s.kw + kj];
      }
    }
  }
  return acc;
}

inline double conv_gin_cell(const ConvShape& s, const double* w, const double* gout, int ic, int ii,
                            int jj) {
  const int ph = s.pad_h(), pw = s.pad_w();
  double acc = 0.0;
  for (int oc = 0; oc < s.cout; ++oc) {
    const double* goc = gout + static_cast<std::size_t>(oc) * s.h * s.w;
    const double* wk = w + (static_cast<std::size_t>(oc) * s.cin + ic) * s.kh * s.kw;
    for (int ki = 0; ki < s.kh; ++ki) {
      int i = ii - ki + ph;
      if (i < 0 || i >= s.h) continue;
      for (int kj = 0; kj < s.kw; ++kj) {
        int j = jj - kj + pw;
        if (j < 0 || j >= s.w) continue;
        acc += goc[i * s.w + j] * wk[ki * s.kw + kj];
      }
    }
  }
  return acc;
}

inline void conv_gw_slice(const ConvShape& s, const double* in, const double* gout, double* gw,
                          double* gb, int oc) {
  const int ph = s.pad_h(), pw = s.pad_w();
  const double* goc = gout + static_cast<std::size_t>(oc) * s.h * s.w;
  double bacc = 0.0;
  for (int n = 0; n < s.h * s.w; ++n) bacc += goc[n];
  gb[oc] += bacc;
  for (int ic = 0; ic < s.cin; ++ic) {
    const double* inc = in + static_cast<std::size_t>(ic) * s.h * s.w;
    double* gwk = gw + (static_cast<std::size_t>(oc) * s.cin + ic) * s.kh * s.kw;
    for (int ki = 0; ki < s.kh; ++ki) {
      for (int kj = 0; kj < s.kw; ++kj) {
        double acc = 0.0;
        for (int i = 0; i < s.h; ++i) {
          int ii = i + ki - ph;
          if (ii < 0 || ii >= s.h) continue;
          for (int j = 0; j < s.w; ++j) {
            int jj = j + kj - pw;
            if (jj < 0 || jj >= s.w) continue;
            acc += goc[i * s.w + j] * inc[ii * s.w + jj];
          }
        }
        gwk[ki * s.kw + kj] += acc;
      }
    }
  }
}

}  // namespace

void conv2d_forward_serial(const ConvShape& s, const double* in, const double* w, const double* b,
                           double* out) {
  for (int oc = 0; oc < s.cout; ++oc)
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j)
        out[(static_cast<std::size_t>(oc) * s.h + i) * s.w + j] = conv_cell(s, in, w, b, oc, i, j);
}

void conv2d_forward_omp(const ConvShape& s, const double* in, const double* w, const double* b,
                        double* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < s.cout; ++oc)
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j)
        out[(static_cast<std::size_t>(oc) * s.h + i) * s.w + j] = conv_cell(s, in, w, b, oc, i, j);
}

void conv2d_backward_input_serial(const ConvShape& s, const double* w, const double* gout,
                                  double* gin) {
  for (int ic = 0; ic < s.cin; ++ic)
    for (int ii = 0; ii < s.h; ++ii)
      for (int jj = 0; jj < s.w; ++jj)
        gin[(static_cast<std::size_t>(ic) * s.h + ii) * s.w + jj] +=
            conv_gin_cell(s, w, gout, ic, ii, jj);
}

void conv2d_backward_input_omp(const ConvShape& s, const double* w, const double* gout,
                               double* gin) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int ic = 0; ic < s.cin; ++ic)
    for (int ii = 0; ii < s.h; ++ii)
      for (int jj = 0; jj < s.w; ++jj)
        gin[(static_cast<std::size_t>(ic) * s.h + ii) * s.w + jj] +=
            conv_gin_cell(s, w, gout, ic, ii, jj);
}

void conv2d_backward_weights_serial(const ConvShape& s, const double* in, const double* gout,
                                    double* gw, double* gb) {
  for (int oc = 0; oc < s.cout; ++oc) conv_gw_slice(s, in, gout, gw, gb, oc);
}

void conv2d_backward_weights_omp(const ConvShape& s, const double* in, const double* gout,
                                 double* gw, double* gb) {
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < s.cout; ++oc) conv_gw_slice(s, in, gout, gw, gb, oc);
}

namespace {

ConvShape shape_of(const Tensor& in, const Tensor& w) {
  require(in.ndim() == 3, "conv2d: input must be [cin,h,w], got " + in.shape_str());
  require(w.ndim() == 4, "conv2d: weights must be [cout,cin,kh,kw], got " + w.shape_str());
  ConvShape s;
  s.cin = in.dim(0);
  s.h = in.dim(1);
  s.w = in.dim(2);
  s.cout = w.dim(0);
  s.kh = w.dim(2);
  s.kw = w.dim(3);
  require(w.dim(1) == s.cin, "conv2d: weight cin mismatch");
  require(s.kh % 2 == 1 && s.kw % 2 == 1, "conv2d: kernel dims must be odd");
  return s;
}

}  // namespace

Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b) {
  ConvShape s = shape_of(in, w);
  require_shape(b, {s.cout}, "conv2d bias");
  Tensor out({s.cout, s.h, s.w});
  conv2d_forward_omp(s, in.data(), w.data(), b.data(), out.data());
  return out;
}

void conv2d_backward_input(const Tensor& w, const Tensor& gout, Tensor& gin) {
  ConvShape s = shape_of(gin, w);
  require_shape(gout, {s.cout, s.h, s.w}, "conv2d grad-out");
  conv2d_backward_input_omp(s, w.data(), gout.data(), gin.data());
}

void conv2d_backward_weights(const Tensor& in, const Tensor& gout, Tensor& gw, Tensor& gb) {
  ConvShape s = shape_of(in, gw);
  require_shape(gout, {s.cout, s.h, s.w}, "conv2d grad-out");
  require_shape(gb, {s.cout}, "conv2d grad-bias");
  conv2d_backward_weights_omp(s, in.data(), gout.data(), gw.data(), gb.data());
}

Tensor maxpool2_forward(const Tensor& in, Tensor& argmax) {
  require(in.ndim() == 3, "maxpool2: input must be [c,h,w], got " + in.shape_str());
  const int c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const int ho = pool_out(h), wo = pool_out(w);
  Tensor out({c, ho, wo});
  argmax = Tensor({c, ho, wo});
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < c; ++ic) {
    const double* inc = in.data() + static_cast<std::size_t>(ic) * h * w;
    for (int oi = 0; oi < ho; ++oi) {
      for (int oj = 0; oj < wo; ++oj) {
        int i0 = oi * 2, j0 = oj * 2;
        int i1 = std::min(i0 + 2, h), j1 = std::min(j0 + 2, w);
        int best = i0 * w + j0;
        double bv = inc[best];
        for (int i = i0; i < i1; ++i)
          for (int j = j0; j < j1; ++j)
            if (inc[i * w + j] > bv) {
              bv = inc[i * w + j];
              best = i * w + j;
            }
        out.at(ic, oi, oj) = bv;
        argmax.at(ic, oi, oj) = static_cast<double>(best);
      }
    }
  }
  return out;
}

void maxpool2_backward(const Tensor& gout, const Tensor& argmax, Tensor& gin) {
  require(gin.ndim() == 3 && gout.ndim() == 3, "maxpool2 backward: rank mismatch");
  const int c = gin.dim(0), h = gin.dim(1), w = gin.dim(2);
  const int ho = gout.dim(1), wo = gout.dim(2);
  require(gout.dim(0) == c && ho == pool_out(h) && wo == pool_out(w),
          "maxpool2 backward: shape mismatch");
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < c; ++ic) {
    double* ginc = gin.data() + static_cast<std::size_t>(ic) * h * w;
    for (int oi = 0; oi < ho; ++oi)
      for (int oj = 0; oj < wo; ++oj)
        ginc[static_cast<int>(argmax.at(ic, oi, oj))] += gout.at(ic, oi, oj);
  }
}

Tensor upsample_to(const Tensor& in, int ho, int wo) {
  require(in.ndim() == 3, "upsample_to: input must be [c,h,w], got " + in.shape_str());
  require(ho > 0 && wo > 0, "upsample_to: target dims must be positive");
  const int c = in.dim(0), hi = in.dim(1), wi = in.dim(2);
  Tensor out({c, ho, wo});
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < c; ++ic)
    for (int i = 0; i < ho; ++i) {
      int si = static_cast<int>((static_cast<long long>(i) * hi) / ho);
      for (int j = 0; j < wo; ++j) {
        int sj = static_cast<int>((static_cast<long long>(j) * wi) / wo);
        out.at(ic, i, j) = in.at(ic, si, sj);
      }
    }
  return out;
}

void upsample_to_backward(const Tensor& gout, int hi, int wi, Tensor& gin) {
  require(gout.ndim() == 3 && gin.ndim() == 3, "upsample_to backward: rank mismatch");
  const int c = gin.dim(0), ho = gout.dim(1), wo = gout.dim(2);
  require(gout.dim(0) == c && gin.dim(1) == hi && gin.dim(2) == wi,
          "upsample_to backward: shape mismatch");
  auto lo = [](int s, int nout, int nin) {
    return static_cast<int>((static_cast<long long>(s) * nout + nin - 1) / nin);
  };
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < c; ++ic)
    for (int ii = 0; ii < hi; ++ii) {
      int i0 = lo(ii, ho, hi), i1 = std::min(ho, lo(ii + 1, ho, hi));
      for (int jj = 0; jj < wi; ++jj) {
        int j0 = lo(jj, wo, wi), j1 = std::min(wo, lo(jj + 1, wo, wi));
        double acc = 0.0;
        for (int i = i0; i < i1; ++i)
          for (int j = j0; j < j1; ++j) acc += gout.at(ic, i, j);
        gin.at(ic, ii, jj) += acc;
      }
    }
}

double unary_eval(Unary op, double x) {
  switch (op) {
    case Unary::Relu:
      return x > 0.0 ? x : 0.0;
    case Unary::Sigmoid:
      return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    case Unary::Tanh:
      return std::tanh(x);
    case Unary::Softplus:
      return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  return 0.0;
}

double unary_grad(Unary op, double x, double y) {
  switch (op) {
    case Unary::Relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Unary::Sigmoid:
      return y * (1.0 - y);
    case Unary::Tanh:
      return 1.0 - y * y;
    case Unary::Softplus:
      return unary_eval(Unary::Sigmoid, x);
  }
  return 0.0;
}

Tensor unary_forward(Unary op, const Tensor& in) {
  Tensor out(in.shape());
  const double* src = in.data();
  double* dst = out.data();
  const std::size_t n = in.numel();
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < static_cast<long long>(n); ++k) dst[k] = unary_eval(op, src[k]);
  return out;
}

void unary_backward(Unary op, const Tensor& in, const Tensor& out, const Tensor& gout,
                    Tensor& gin) {
  require(in.same_shape(gin) && in.same_shape(gout) && in.same_shape(out),
          "unary backward: shape mismatch");
  const double* x = in.data();
  const double* y = out.data();
  const double* g = gout.data();
  double* gi = gin.data();
  const std::size_t n = in.numel();
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < static_cast<long long>(n); ++k)
    gi[k] += g[k] * unary_grad(op, x[k], y[k]);
}

}  // namespace mcu::kernels

#pragma once

#include "mcunet/tensor.hpp"

// Compute kernels. Every kernel has a serial reference and an OpenMP twin with
// the same inner accumulation order; only the outermost loop is parallelised
// and every iteration writes a disjoint output slice, so the two produce
// bit-identical results (tools/bench_kernels compares them).
//
// Backward kernels ACCUMULATE (+=) into caller-zeroed gradient buffers.

namespace mcu::kernels {

// Same-padded 2D convolution, odd kernels. Input [cin,h,w], weights
// [cout,cin,kh,kw], bias [cout], output [cout,h,w].
struct ConvShape {
  int cin = 0, h = 0, w = 0;
  int cout = 0, kh = 0, kw = 0;
  int pad_h() const { return kh / 2; }
  int pad_w() const { return kw / 2; }
};

void conv2d_forward_serial(const ConvShape& s, const double* in, const double* w, const double* b,
                           double* out);
void conv2d_forward_omp(const ConvShape& s, const double* in, const double* w, const double* b,
                        double* out);
void conv2d_backward_input_serial(const ConvShape& s, const double* w, const double* gout,
                                  double* gin);
void conv2d_backward_input_omp(const ConvShape& s, const double* w, const double* gout,
                               double* gin);
void conv2d_backward_weights_serial(const ConvShape& s, const double* in, const double* gout,
                                    double* gw, double* gb);
void conv2d_backward_weights_omp(const ConvShape& s, const double* in, const double* gout,
                                 double* gw, double* gb);

Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b);
void conv2d_backward_input(const Tensor& w, const Tensor& gout, Tensor& gin);
void conv2d_backward_weights(const Tensor& in, const Tensor& gout, Tensor& gw, Tensor& gb);

// 2x2 max pool, stride 2, ceil semantics: output is ceil(h/2) x ceil(w/2) and
// boundary windows are clipped, so pooling never drops below 1x1. argmax holds
// the flat input index of each window maximum (windows are disjoint, so the
// backward scatter is race-free).
inline int pool_out(int n) { return (n + 1) / 2; }

Tensor maxpool2_forward(const Tensor& in, Tensor& argmax);
void maxpool2_backward(const Tensor& gout, const Tensor& argmax, Tensor& gin);

// Nearest-neighbour resize to an arbitrary target, src index = floor(i*hi/ho).
// Pairs with the ceil pool: upsample_to(pooled, pre-pool shape) restores the
// stage geometry whatever the odd sizes were.
Tensor upsample_to(const Tensor& in, int ho, int wo);
void upsample_to_backward(const Tensor& gout, int hi, int wi, Tensor& gin);

// Pointwise maps and their input-gradient accumulators.
enum class Unary { Relu, Sigmoid, Tanh, Softplus };

double unary_eval(Unary op, double x);
double unary_grad(Unary op, double x, double y);  // dy/dx given x and y=f(x)

Tensor unary_forward(Unary op, const Tensor& in);
void unary_backward(Unary op, const Tensor& in, const Tensor& out, const Tensor& gout,
                    Tensor& gin);

}  // namespace mcu::kernels

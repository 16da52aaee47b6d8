#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mcunet/tensor.hpp"

// Define-by-run reverse-mode differentiation over Tensor. Ops compute their
// value eagerly and push a backward closure; backward(root) topologically
// sorts the DAG reachable from a scalar root and accumulates gradients into
// every node with requires_grad set. Graphs are rebuilt each step: parameters
// live as plain Tensors outside and are wrapped with param() per iteration.

namespace mcu::ad {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  explicit Node(Tensor v) : value(std::move(v)) {}
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor v);
Var param(Tensor v);

inline const Tensor& val(const Var& v) { return v->value; }
inline const Tensor& grad_of(const Var& v) { return v->grad; }

// Seeds the scalar root with gradient 1 and runs the tape in reverse
// topological order. Root must have shape [1].
void backward(const Var& root);

// Elementwise arithmetic (shapes must match).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& x, double s);
Var add_const(const Var& x, double c);

// Broadcast product of a scalar variable [1] with a tensor.
Var smul(const Var& s, const Var& x);

// Pointwise nonlinearities.
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh_v(const Var& x);
Var softplus(const Var& x);

// Elementwise shrinkage by a learnable scalar threshold [1]:
//   out = sign(x) * max(|x| - t, 0).
Var soft_threshold(const Var& x, const Var& t);

// Structure ops on [c,h,w].
Var conv2d(const Var& x, const Var& w, const Var& b);
Var maxpool2(const Var& x);
Var upsample_to(const Var& x, int ho, int wo);
Var concat_ch(const std::vector<Var>& parts);
Var slice_ch(const Var& x, int c0, int c1);

// Complex magnitude [2,H,W] -> [1,H,W], smoothed near zero.
Var magnitude(const Var& x);

// Confidence-weighted fusion with a single-channel map broadcast over the
// two complex channels: out = a.*m + b.*(1-m).
Var conf_blend(const Var& a, const Var& b, const Var& m);

// Encoding chain as single linear nodes (csm/mask are fixed per sample).
Var forward_model_v(const Var& image, const Tensor& csm, const Tensor& mask);
Var adjoint_model_v(const Var& kspace, const Tensor& csm, const Tensor& mask);

// Image-space soft data-consistency projection; mu is a learnable scalar [1]
// holding the (already positive) blend weight.
Var dc_project_v(const Var& image, const Tensor& meas, const Tensor& csm, const Tensor& mask,
                 const Var& mu);

// Reductions to [1].
Var sum_v(const Var& x);
Var mean_v(const Var& x);
Var sum_sq(const Var& x);

}  // namespace mcu::ad

#include "mcunet/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "mcunet/fft.hpp"
#include "mcunet/kernels.hpp"
#include "mcunet/mri_ops.hpp"

namespace mcu::ad {

namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>(std::move(value));
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(bwd);
  }
  return n;
}

void check_same(const Var& a, const Var& b, const char* who) {
  require(a->value.same_shape(b->value), std::string(who) + ": shape mismatch " +
                                             a->value.shape_str() + " vs " + b->value.shape_str());
}

void check_scalar(const Var& s, const char* who) {
  require(s->value.numel() == 1, std::string(who) + ": expected scalar [1]");
}

}  // namespace

Var constant(Tensor v) { return std::make_shared<Node>(std::move(v)); }

Var param(Tensor v) {
  auto n = std::make_shared<Node>(std::move(v));
  n->requires_grad = true;
  return n;
}

void backward(const Var& root) {
  require(root->value.numel() == 1, "backward: root must be scalar");
  require(root->requires_grad, "backward: root does not depend on any parameter");

  // iterative post-order DFS over grad-requiring ancestry
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad = Tensor::zeros(n->value.shape());
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

Var add(const Var& a, const Var& b) {
  check_same(a, b, "add");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i];
  });
}

Var sub(const Var& a, const Var& b) {
  check_same(a, b, "sub");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i) b->grad[i] -= self.grad[i];
  });
}

Var mul(const Var& a, const Var& b) {
  check_same(a, b, "mul");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] * b->value[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i] * a->value[i];
  });
}

Var div(const Var& a, const Var& b) {
  check_same(a, b, "div");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] / b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] / b->value[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i)
        b->grad[i] -= self.grad[i] * self.value[i] / b->value[i];
  });
}

Var scale(const Var& x, double s) {
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = s * x->value[i];
  return make_node(std::move(out), {x}, [x, s](Node& self) {
    for (std::size_t i = 0; i < self.grad.numel(); ++i) x->grad[i] += s * self.grad[i];
  });
}

Var add_const(const Var& x, double c) {
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x->value[i] + c;
  return make_node(std::move(out), {x}, [x](Node& self) {
    for (std::size_t i = 0; i < self.grad.numel(); ++i) x->grad[i] += self.grad[i];
  });
}

Var smul(const Var& s, const Var& x) {
  check_scalar(s, "smul");
  const double sv = s->value[0];
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = sv * x->value[i];
  return make_node(std::move(out), {s, x}, [s, x, sv](Node& self) {
    if (s->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.numel(); ++i) acc += self.grad[i] * x->value[i];
      s->grad[0] += acc;
    }
    if (x->requires_grad)
      for (std::size_t i = 0; i < self.grad.numel(); ++i) x->grad[i] += sv * self.grad[i];
  });
}

namespace {

Var unary(kernels::Unary op, const Var& x) {
  Tensor out = kernels::unary_forward(op, x->value);
  return make_node(std::move(out), {x}, [x, op](Node& self) {
    kernels::unary_backward(op, x->value, self.value, self.grad, x->grad);
  });
}

}  // namespace

Var relu(const Var& x) { return unary(kernels::Unary::Relu, x); }
Var sigmoid(const Var& x) { return unary(kernels::Unary::Sigmoid, x); }
Var tanh_v(const Var& x) { return unary(kernels::Unary::Tanh, x); }
Var softplus(const Var& x) { return unary(kernels::Unary::Softplus, x); }

Var soft_threshold(const Var& x, const Var& t) {
  check_scalar(t, "soft_threshold");
  const double tv = t->value[0];
  require(tv >= 0.0, "soft_threshold: negative threshold");
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double v = x->value[i];
    double m = std::abs(v) - tv;
    out[i] = m > 0.0 ? (v > 0.0 ? m : -m) : 0.0;
  }
  return make_node(std::move(out), {x, t}, [x, t, tv](Node& self) {
    double tacc = 0.0;
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      double v = x->value[i];
      if (std::abs(v) > tv) {
        if (x->requires_grad) x->grad[i] += self.grad[i];
        tacc -= self.grad[i] * (v > 0.0 ? 1.0 : -1.0);
      }
    }
    if (t->requires_grad) t->grad[0] += tacc;
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b) {
  Tensor out = kernels::conv2d_forward(x->value, w->value, b->value);
  return make_node(std::move(out), {x, w, b}, [x, w, b](Node& self) {
    if (x->requires_grad) kernels::conv2d_backward_input(w->value, self.grad, x->grad);
    if (w->requires_grad || b->requires_grad) {
      Tensor scratch_w, scratch_b;  // sinks when only one of w/b is trainable
      Tensor& gw = w->requires_grad ? w->grad : (scratch_w = Tensor::zeros(w->value.shape()));
      Tensor& gb = b->requires_grad ? b->grad : (scratch_b = Tensor::zeros(b->value.shape()));
      kernels::conv2d_backward_weights(x->value, self.grad, gw, gb);
    }
  });
}

Var maxpool2(const Var& x) {
  auto argmax = std::make_shared<Tensor>(Tensor({1}));
  Tensor out = kernels::maxpool2_forward(x->value, *argmax);
  return make_node(std::move(out), {x}, [x, argmax](Node& self) {
    kernels::maxpool2_backward(self.grad, *argmax, x->grad);
  });
}

Var upsample_to(const Var& x, int ho, int wo) {
  const int hi = x->value.dim(1), wi = x->value.dim(2);
  Tensor out = kernels::upsample_to(x->value, ho, wo);
  return make_node(std::move(out), {x}, [x, hi, wi](Node& self) {
    kernels::upsample_to_backward(self.grad, hi, wi, x->grad);
  });
}

Var concat_ch(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_ch: empty input");
  const int h = parts[0]->value.dim(1), w = parts[0]->value.dim(2);
  int ctot = 0;
  for (const auto& p : parts) {
    require(p->value.ndim() == 3 && p->value.dim(1) == h && p->value.dim(2) == w,
            "concat_ch: incompatible part " + p->value.shape_str());
    ctot += p->value.dim(0);
  }
  Tensor out({ctot, h, w});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.numel(), out.data() + off);
    off += p->value.numel();
  }
  return make_node(std::move(out), parts, [parts](Node& self) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      if (p->requires_grad)
        for (std::size_t i = 0; i < p->value.numel(); ++i) p->grad[i] += self.grad[off + i];
      off += p->value.numel();
    }
  });
}

Var slice_ch(const Var& x, int c0, int c1) {
  require(x->value.ndim() == 3, "slice_ch: expected [c,h,w]");
  require(0 <= c0 && c0 < c1 && c1 <= x->value.dim(0), "slice_ch: bad channel range");
  const int h = x->value.dim(1), w = x->value.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({c1 - c0, h, w});
  std::copy(x->value.data() + c0 * plane, x->value.data() + c1 * plane, out.data());
  return make_node(std::move(out), {x}, [x, c0, plane](Node& self) {
    for (std::size_t i = 0; i < self.grad.numel(); ++i) x->grad[c0 * plane + i] += self.grad[i];
  });
}

Var magnitude(const Var& x) {
  require(x->value.ndim() == 3 && x->value.dim(0) == 2, "magnitude: expected [2,H,W]");
  const int h = x->value.dim(1), w = x->value.dim(2);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  Tensor out({1, h, w});
  const double* re = x->value.data();
  const double* im = re + n;
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::sqrt(re[i] * re[i] + im[i] * im[i] + 1e-24);
  return make_node(std::move(out), {x}, [x, n](Node& self) {
    const double* re = x->value.data();
    const double* im = re + n;
    for (std::size_t i = 0; i < n; ++i) {
      double g = self.grad[i] / self.value[i];
      x->grad[i] += g * re[i];
      x->grad[n + i] += g * im[i];
    }
  });
}

Var conf_blend(const Var& a, const Var& b, const Var& m) {
  check_same(a, b, "conf_blend");
  require(a->value.ndim() == 3 && a->value.dim(0) == 2, "conf_blend: expected [2,H,W] inputs");
  require_shape(m->value, {1, a->value.dim(1), a->value.dim(2)}, "conf_blend map");
  const std::size_t n = m->value.numel();
  Tensor out(a->value.shape());
  // b + m*(a-b) with a saturation branch: keeps m==0, m==1 and a==b cases
  // exact in floating point (same function, same derivatives)
  for (int ch = 0; ch < 2; ++ch)
    for (std::size_t i = 0; i < n; ++i) {
      double mv = m->value[i];
      double av = a->value[ch * n + i], bv = b->value[ch * n + i];
      out[ch * n + i] = mv == 1.0 ? av : bv + mv * (av - bv);
    }
  return make_node(std::move(out), {a, b, m}, [a, b, m, n](Node& self) {
    for (int ch = 0; ch < 2; ++ch)
      for (std::size_t i = 0; i < n; ++i) {
        double g = self.grad[ch * n + i];
        double mv = m->value[i];
        if (a->requires_grad) a->grad[ch * n + i] += g * mv;
        if (b->requires_grad) b->grad[ch * n + i] += g * (1.0 - mv);
        if (m->requires_grad) m->grad[i] += g * (a->value[ch * n + i] - b->value[ch * n + i]);
      }
  });
}

Var forward_model_v(const Var& image, const Tensor& csm, const Tensor& mask) {
  Tensor out = forward_model(image->value, csm, mask);
  return make_node(std::move(out), {image}, [image, csm, mask](Node& self) {
    Tensor gx = adjoint_model(self.grad, csm, mask);
    for (std::size_t i = 0; i < gx.numel(); ++i) image->grad[i] += gx[i];
  });
}

Var adjoint_model_v(const Var& kspace, const Tensor& csm, const Tensor& mask) {
  Tensor out = adjoint_model(kspace->value, csm, mask);
  return make_node(std::move(out), {kspace}, [kspace, csm, mask](Node& self) {
    Tensor gy = forward_model(self.grad, csm, mask);
    for (std::size_t i = 0; i < gy.numel(); ++i) kspace->grad[i] += gy[i];
  });
}

Var dc_project_v(const Var& image, const Tensor& meas, const Tensor& csm, const Tensor& mask,
                 const Var& mu) {
  check_scalar(mu, "dc_project_v");
  const double muv = mu->value[0];
  auto kspace = std::make_shared<Tensor>(fft2c_coils(expand(image->value, csm)));
  Tensor out = reduce(ifft2c_coils(dc_blend(*kspace, meas, mask, muv)), csm);
  // closures own copies of meas/csm/mask; the caller's tensors may not outlive
  // the graph
  return make_node(std::move(out), {image, mu}, [image, mu, kspace, meas, csm, mask,
                                                 muv](Node& self) {
    if (image->requires_grad) {
      // the x -> out map is self-adjoint; propagating the gradient through it
      // equals projecting with zero measurements
      Tensor zero = Tensor::zeros(meas.shape());
      Tensor gx = dc_project(self.grad, zero, csm, mask, muv);
      for (std::size_t i = 0; i < gx.numel(); ++i) image->grad[i] += gx[i];
    }
    if (mu->requires_grad) {
      const std::size_t n = static_cast<std::size_t>(mask.numel());
      Tensor s(meas.shape());
      const double inv2 = 1.0 / ((1.0 + muv) * (1.0 + muv));
      for (int ic = 0; ic < meas.dim(0); ++ic)
        for (int ch = 0; ch < 2; ++ch) {
          const std::size_t off = (static_cast<std::size_t>(ic) * 2 + ch) * n;
          for (std::size_t k = 0; k < n; ++k)
            s[off + k] = mask[k] != 0.0 ? (meas[off + k] - (*kspace)[off + k]) * inv2 : 0.0;
        }
      mu->grad[0] += dot(reduce(ifft2c_coils(s), csm), self.grad);
    }
  });
}

Var sum_v(const Var& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x->value.numel(); ++i) s += x->value[i];
  return make_node(Tensor::scalar(s), {x}, [x](Node& self) {
    const double g = self.grad[0];
    for (std::size_t i = 0; i < x->value.numel(); ++i) x->grad[i] += g;
  });
}

Var mean_v(const Var& x) {
  const double n = static_cast<double>(x->value.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < x->value.numel(); ++i) s += x->value[i];
  return make_node(Tensor::scalar(s / n), {x}, [x, n](Node& self) {
    const double g = self.grad[0] / n;
    for (std::size_t i = 0; i < x->value.numel(); ++i) x->grad[i] += g;
  });
}

Var sum_sq(const Var& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x->value.numel(); ++i) s += x->value[i] * x->value[i];
  return make_node(Tensor::scalar(s), {x}, [x](Node& self) {
    const double g = 2.0 * self.grad[0];
    for (std::size_t i = 0; i < x->value.numel(); ++i) x->grad[i] += g * x->value[i];
  });
}

}  // namespace mcu::ad

#include "mcunet/model.hpp"

#include <cmath>

#include "mcunet/fft.hpp"
#include "mcunet/mri_ops.hpp"

namespace mcu {

namespace {

double inv_softplus(double y) { return std::log(std::expm1(y)); }

std::string coca_prefix(int k) { return "coca" + std::to_string(k); }

nn::UNetSpec lowrank_spec(const ModelConfig& cfg) { return {cfg.lowrank_ch, 2, 2, false}; }
nn::UNetSpec correction_spec(const ModelConfig& cfg) { return {cfg.correction_ch, 2, 2, true}; }

}  // namespace

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants())
    if (variant_name(v) == name) return v;
  std::string valid;
  for (Variant v : all_variants()) valid += " " + variant_name(v);
  require(false, "unknown variant '" + name + "'; valid:" + valid);
  return Variant::original;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::original: return "original";
    case Variant::addition: return "addition";
    case Variant::no_gsam: return "no_gsam";
    case Variant::no_gates: return "no_gates";
    case Variant::no_rc: return "no_rc";
    case Variant::no_oc: return "no_oc";
    case Variant::no_correction: return "no_correction";
  }
  return "?";
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::original, Variant::addition, Variant::no_gsam,
                                      Variant::no_gates, Variant::no_rc,    Variant::no_oc,
                                      Variant::no_correction};
  return v;
}

bool uses_gcff(Variant v) {
  return v == Variant::original || v == Variant::no_rc || v == Variant::no_oc ||
         v == Variant::no_correction;
}

bool uses_gatefree(Variant v) { return v == Variant::no_gates; }

bool uses_cm(Variant v) {
  return v == Variant::original || v == Variant::no_gsam || v == Variant::no_gates ||
         v == Variant::no_rc || v == Variant::no_oc;
}

int confidence_channels(Variant v) {
  if (v == Variant::no_rc || v == Variant::no_oc) return 1;
  return 2;
}

nn::ParamSet build_params(const ModelConfig& cfg, std::uint64_t seed) {
  require(cfg.k >= 1, "model: cascade count must be >= 1");
  nn::ParamSet ps;
  Rng rng(derive_seed(seed, "model-init"));
  const int hid = cfg.gsam_hidden;
  const int mch = confidence_channels(cfg.variant);
  if (uses_gcff(cfg.variant)) nn::add_conv(ps, rng, "winit", 2, hid, 3);
  for (int k = 0; k < cfg.k; ++k) {
    const std::string p = coca_prefix(k);
    const int w = cfg.sparse_width;
    ps.add(p + ".alpha_s", Tensor::scalar(0.5));
    ps.add(p + ".lam1_raw", Tensor::scalar(inv_softplus(1e-3)));
    nn::add_conv(ps, rng, p + ".g0", 2, w, 3);
    nn::add_conv(ps, rng, p + ".g1", w, w, 3);
    nn::add_conv(ps, rng, p + ".gt0", w, w, 3);
    nn::add_conv(ps, rng, p + ".gt1", w, 2, 3);

    ps.add(p + ".alpha_l", Tensor::scalar(0.5));
    ps.add(p + ".lam2_raw", Tensor::scalar(inv_softplus(1e-2)));
    nn::add_unet(ps, rng, p + ".nl", lowrank_spec(cfg));

    if (uses_gcff(cfg.variant)) {
      nn::add_conv(ps, rng, p + ".gcff.nin", 4, hid, 3);
      for (const char* g : {"wxf", "wxi", "wxj", "wxo"})
        nn::add_conv(ps, rng, p + ".gcff." + std::string(g), hid, hid, 3);
      for (const char* g : {"whf", "whi", "whj", "who"})
        ps.add(p + ".gcff." + std::string(g) + ".w", nn::kaiming_conv(rng, hid, hid, 3));
      nn::add_conv(ps, rng, p + ".gcff.nout", 2 * hid, mch, 3);
      nn::add_conv(ps, rng, p + ".gcff.wg", 2 * hid, hid, 1);
    }
    if (uses_gatefree(cfg.variant)) {
      nn::add_conv(ps, rng, p + ".gatefree.c0", 4, hid, 3);
      nn::add_conv(ps, rng, p + ".gatefree.c1", hid, mch, 3);
    }
    if (uses_cm(cfg.variant)) {
      nn::add_unet(ps, rng, p + ".nr", correction_spec(cfg));
      ps.add(p + ".mu_raw", Tensor::scalar(inv_softplus(1.0)));
    }
  }
  return ps;
}

std::int64_t param_count(const ModelConfig& cfg) {
  using nn::conv_param_count;
  const int hid = cfg.gsam_hidden, w = cfg.sparse_width;
  const int mch = confidence_channels(cfg.variant);
  std::int64_t per = 0;
  per += 2 + conv_param_count(2, w, 3) + conv_param_count(w, w, 3) + conv_param_count(w, w, 3) +
         conv_param_count(w, 2, 3);
  per += 2 + nn::unet_param_count(lowrank_spec(cfg));
  if (uses_gcff(cfg.variant))
    per += conv_param_count(4, hid, 3) + 8LL * hid * hid * 9 + 4LL * hid +
           conv_param_count(2 * hid, mch, 3) + conv_param_count(2 * hid, hid, 1);
  if (uses_gatefree(cfg.variant))
    per += conv_param_count(4, hid, 3) + conv_param_count(hid, mch, 3);
  if (uses_cm(cfg.variant)) per += nn::unet_param_count(correction_spec(cfg)) + 1;
  std::int64_t total = per * cfg.k;
  if (uses_gcff(cfg.variant)) total += conv_param_count(2, hid, 3);
  return total;
}

ad::Var gradient_step(const ad::Var& x, const Tensor& y, const Tensor& csm, const Tensor& mask,
                      const ad::Var& alpha) {
  ad::Var res = ad::sub(ad::forward_model_v(x, csm, mask), ad::constant(y));
  return ad::sub(x, ad::smul(alpha, ad::adjoint_model_v(res, csm, mask)));
}

namespace {

// shared per-cascade data-fidelity direction A*(A x - y)
ad::Var residual_grad(const ad::Var& x, const Tensor& y, const Tensor& csm, const Tensor& mask) {
  ad::Var res = ad::sub(ad::forward_model_v(x, csm, mask), ad::constant(y));
  return ad::adjoint_model_v(res, csm, mask);
}

SparseOut ns_core(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x,
                  const ad::Var& adj) {
  (void)cfg;
  const std::string p = coca_prefix(k);
  ad::Var r_s = ad::sub(x, ad::smul(b[p + ".alpha_s"], adj));
  ad::Var u = nn::conv(b, p + ".g1", ad::relu(nn::conv(b, p + ".g0", r_s)));
  ad::Var lam = ad::softplus(b[p + ".lam1_raw"]);
  ad::Var x_s = nn::conv(b, p + ".gt1", ad::relu(nn::conv(b, p + ".gt0", ad::soft_threshold(u, lam))));
  ad::Var round_trip = nn::conv(b, p + ".gt1", ad::relu(nn::conv(b, p + ".gt0", u)));
  ad::Var sym = ad::sum_sq(ad::sub(round_trip, r_s));
  return {x_s, r_s, sym};
}

ad::Var nl_core(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x,
                const ad::Var& adj) {
  const std::string p = coca_prefix(k);
  ad::Var lam2 = ad::softplus(b[p + ".lam2_raw"]);
  ad::Var r_l = ad::smul(lam2, nn::unet(b, p + ".nl", lowrank_spec(cfg), x));
  return ad::sub(x, ad::smul(b[p + ".alpha_l"], ad::add(adj, ad::scale(r_l, 2.0))));
}

}  // namespace

SparseOut ns_forward(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x,
                     const Tensor& y, const Tensor& csm, const Tensor& mask) {
  return ns_core(b, cfg, k, x, residual_grad(x, y, csm, mask));
}

ad::Var nl_forward(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x,
                   const Tensor& y, const Tensor& csm, const Tensor& mask) {
  return nl_core(b, cfg, k, x, residual_grad(x, y, csm, mask));
}

GcffState init_state(const nn::Binding& b, const ModelConfig& cfg, const Tensor& x0) {
  if (!uses_gcff(cfg.variant)) return {};
  require(x0.ndim() == 3 && x0.dim(0) == 2, "init_state: expected [2,H,W]");
  ad::Var c = nn::conv(b, "winit", ad::constant(x0));
  ad::Var h = ad::constant(Tensor::zeros({cfg.gsam_hidden, x0.dim(1), x0.dim(2)}));
  return {c, h};
}

GcffOut gcff_step(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x_s,
                  const ad::Var& x_l, const GcffState& state) {
  require(uses_gcff(cfg.variant), "gcff_step: variant has no gated cell");
  require(state.c && state.h, "gcff_step: uninitialized state");
  require(state.c->value.same_shape(state.h->value) &&
              state.c->value.dim(0) == cfg.gsam_hidden &&
              state.c->value.dim(1) == x_s->value.dim(1) &&
              state.c->value.dim(2) == x_s->value.dim(2),
          "gcff_step: state shape mismatch");
  const std::string p = coca_prefix(k) + ".gcff";
  ad::Var x_in = ad::relu(nn::conv(b, p + ".nin", ad::concat_ch({x_s, x_l})));
  ad::Var zero_b = ad::constant(Tensor::zeros({cfg.gsam_hidden}));
  auto gate = [&](const char* xw, const char* hw) {
    return ad::add(nn::conv(b, p + "." + xw, x_in),
                   ad::conv2d(state.h, b[p + "." + hw + ".w"], zero_b));
  };
  ad::Var f = ad::sigmoid(gate("wxf", "whf"));
  ad::Var i = ad::sigmoid(gate("wxi", "whi"));
  ad::Var j = ad::tanh_v(gate("wxj", "whj"));
  ad::Var g = ad::concat_ch({ad::mul(f, state.c), ad::mul(i, j)});
  ad::Var m = ad::sigmoid(nn::conv(b, p + ".nout", g));
  ad::Var c_next = nn::conv(b, p + ".wg", g);
  ad::Var o = ad::sigmoid(gate("wxo", "who"));
  ad::Var h_next = ad::mul(o, ad::tanh_v(c_next));
  return {{c_next, h_next}, m};
}

namespace {

void check_confidence(const ad::Var& m, const char* who) {
  for (std::size_t i = 0; i < static_cast<std::size_t>(m->value.numel()); ++i)
    require(m->value[i] >= 0.0 && m->value[i] <= 1.0,
            std::string(who) + ": confidence map outside [0,1]");
}

}  // namespace

ad::Var rc_weight(const ad::Var& x_s, const ad::Var& x_l, const ad::Var& m_r) {
  check_confidence(m_r, "rc_weight");
  return ad::conf_blend(x_s, x_l, m_r);
}

ad::Var oc_blend(const ad::Var& x_a, const ad::Var& x_r, const ad::Var& m_o) {
  check_confidence(m_o, "oc_blend");
  return ad::conf_blend(x_a, x_r, m_o);
}

ad::Var correct(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x_a) {
  return ad::add(x_a, nn::unet(b, coca_prefix(k) + ".nr", correction_spec(cfg), x_a));
}

CocaOut coca_forward(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x_prev,
                     const GcffState& state, const Tensor& y, const Tensor& csm,
                     const Tensor& mask) {
  const std::string p = coca_prefix(k);
  ad::Var adj = residual_grad(x_prev, y, csm, mask);
  SparseOut s = ns_core(b, cfg, k, x_prev, adj);
  ad::Var x_l = nl_core(b, cfg, k, x_prev, adj);
  auto mean = [&] { return ad::scale(ad::add(s.x_s, x_l), 0.5); };
  auto dc = [&](const ad::Var& img) {
    return ad::dc_project_v(img, y, csm, mask, ad::softplus(b[p + ".mu_raw"]));
  };

  CocaOut out;
  out.r_s = s.r_s;
  out.sym = s.sym;
  out.state = state;
  switch (cfg.variant) {
    case Variant::original: {
      GcffOut go = gcff_step(b, cfg, k, s.x_s, x_l, state);
      out.state = go.state;
      ad::Var x_a = rc_weight(s.x_s, x_l, ad::slice_ch(go.m, 0, 1));
      ad::Var x_r = correct(b, cfg, k, x_a);
      out.x = dc(oc_blend(x_a, x_r, ad::slice_ch(go.m, 1, 2)));
      break;
    }
    case Variant::addition:
      out.x = mean();
      break;
    case Variant::no_gsam: {
      ad::Var x_r = correct(b, cfg, k, mean());
      out.x = dc(x_r);
      break;
    }
    case Variant::no_gates: {
      ad::Var x_c = ad::concat_ch({s.x_s, x_l});
      ad::Var m = ad::sigmoid(
          nn::conv(b, p + ".gatefree.c1", ad::relu(nn::conv(b, p + ".gatefree.c0", x_c))));
      ad::Var x_a = rc_weight(s.x_s, x_l, ad::slice_ch(m, 0, 1));
      ad::Var x_r = correct(b, cfg, k, x_a);
      out.x = dc(oc_blend(x_a, x_r, ad::slice_ch(m, 1, 2)));
      break;
    }
    case Variant::no_rc: {
      GcffOut go = gcff_step(b, cfg, k, s.x_s, x_l, state);
      out.state = go.state;
      ad::Var x_a = mean();
      ad::Var x_r = correct(b, cfg, k, x_a);
      out.x = dc(oc_blend(x_a, x_r, go.m));
      break;
    }
    case Variant::no_oc: {
      GcffOut go = gcff_step(b, cfg, k, s.x_s, x_l, state);
      out.state = go.state;
      ad::Var x_a = rc_weight(s.x_s, x_l, go.m);
      out.x = dc(correct(b, cfg, k, x_a));
      break;
    }
    case Variant::no_correction: {
      GcffOut go = gcff_step(b, cfg, k, s.x_s, x_l, state);
      out.state = go.state;
      out.x = rc_weight(s.x_s, x_l, ad::slice_ch(go.m, 0, 1));
      break;
    }
  }
  return out;
}

ForwardResult mcunet_forward(const nn::Binding& b, const ModelConfig& cfg, const Tensor& y,
                             const Tensor& csm, const Tensor& mask) {
  ForwardResult r;
  r.x0 = adjoint_model(y, csm, mask);
  GcffState state = init_state(b, cfg, r.x0);
  ad::Var x = ad::constant(r.x0);
  for (int k = 0; k < cfg.k; ++k) {
    CocaOut o = coca_forward(b, cfg, k, x, state, y, csm, mask);
    r.x.push_back(o.x);
    r.rs.push_back(o.r_s);
    r.sym.push_back(o.sym);
    x = o.x;
    state = o.state;
  }
  return r;
}

namespace {

std::int64_t fft_line(int n) {
  return n > 1 ? std::llround(5.0 * n * std::log2(static_cast<double>(n))) : 0;
}

std::int64_t fft2_flops(int h, int w) {
  return static_cast<std::int64_t>(h) * fft_line(w) + static_cast<std::int64_t>(w) * fft_line(h);
}

}  // namespace

FlopsReport count_flops(const ModelConfig& cfg, int h, int w, int coils) {
  using nn::conv_flops;
  require(h >= 1 && w >= 1 && coils >= 1, "count_flops: bad geometry");
  const std::int64_t n2 = 2LL * h * w;           // complex image elements
  const std::int64_t nc = coils * n2;            // coil-stack elements
  const std::int64_t fft_coils = coils * fft2_flops(h, w);
  const std::int64_t fwd_a = nc + fft_coils + nc;      // expand, per-coil FFT, mask
  const std::int64_t adj_a = nc + fft_coils + nc;      // mask, per-coil IFFT, reduce
  const std::int64_t residual = fwd_a + nc + adj_a;    // ... plus k-space subtraction
  const int hid = cfg.gsam_hidden, sw = cfg.sparse_width;
  const int mch = confidence_channels(cfg.variant);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;

  FlopsReport rep;
  // sparse branch carries the shared data-fidelity direction
  rep.sparse = residual + 2 * n2;  // step scale + subtraction
  rep.sparse += conv_flops(h, w, 2, sw, 3) + sw * hw;   // G conv+rectifier
  rep.sparse += conv_flops(h, w, sw, sw, 3);
  rep.sparse += sw * hw;                                // shrinkage
  rep.sparse += conv_flops(h, w, sw, sw, 3) + sw * hw;  // G~ conv+rectifier
  rep.sparse += conv_flops(h, w, sw, 2, 3);

  rep.lowrank = nn::unet_flops(lowrank_spec(cfg), h, w);
  rep.lowrank += 4 * n2;  // lambda2 scale, doubling, step scale, subtraction

  if (uses_gcff(cfg.variant)) {
    rep.gsam = 2LL * n2;                                // concat
    rep.gsam += conv_flops(h, w, 4, hid, 3) + hid * hw; // N_in + rectifier
    rep.gsam += 8 * conv_flops(h, w, hid, hid, 3);      // gate convolutions
    rep.gsam += 4 * 2 * hid * hw;                       // gate sums + activations
    rep.gsam += 2 * hid * hw;                           // f.c and i.j products
    rep.gsam += conv_flops(h, w, 2 * hid, mch, 3) + mch * hw;  // N_out + sigmoid
    rep.gsam += conv_flops(h, w, 2 * hid, hid, 1);      // W_g
    rep.gsam += 2 * hid * hw;                           // tanh + output product
  }
  if (uses_gatefree(cfg.variant)) {
    rep.gsam = 2LL * n2 + conv_flops(h, w, 4, hid, 3) + hid * hw +
               conv_flops(h, w, hid, mch, 3) + mch * hw;
  }

  if (uses_cm(cfg.variant)) {
    rep.correction = nn::unet_flops(correction_spec(cfg), h, w) + n2;  // residual add
    if (cfg.variant != Variant::no_gsam && cfg.variant != Variant::no_oc)
      rep.correction += n2;  // OC blend
    rep.dc = nc + fft_coils + nc + fft_coils + nc;  // expand, FFT, blend, IFFT, reduce
  }

  rep.fuse = n2;  // RC blend or mean
  rep.per_coca = rep.sparse + rep.lowrank + rep.gsam + rep.fuse + rep.correction + rep.dc;
  rep.init = adj_a;
  if (uses_gcff(cfg.variant)) rep.init += conv_flops(h, w, 2, hid, 3);
  return rep;
}

}  // namespace mcu

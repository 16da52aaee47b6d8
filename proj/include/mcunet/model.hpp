#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcunet/nn.hpp"

// The unfolded reconstruction network. Each cascade runs two
// optimization-inspired subnetworks (a shrinkage-based sparse step and a
// U-Net low-rank surrogate), fuses them under a learned relative-confidence
// map, refines with a residual U-Net weighted by an overall-confidence map,
// and projects onto the measurements. A gated recurrent cell threads
// confidence state across cascades.

namespace mcu {

enum class Variant {
  original,
  addition,       // fusion by plain mean; no attention, no correction, no DC
  no_gsam,        // mean fusion, corrected image replaces fused, no OC blend
  no_gates,       // confidence maps from plain convs on concat(x_s, x_l)
  no_rc,          // attention learns OC only; fusion by mean
  no_oc,          // attention learns RC only; corrected replaces weighted
  no_correction,  // weighted fusion goes straight to the next cascade; no DC
};

Variant parse_variant(const std::string& name);  // invalid name -> validation error
std::string variant_name(Variant v);
const std::vector<Variant>& all_variants();

struct ModelConfig {
  int k = 10;
  Variant variant = Variant::original;
  int sparse_width = 32;
  std::vector<int> lowrank_ch{16, 32, 64, 128};
  int gsam_hidden = 8;
  std::vector<int> correction_ch{4, 8, 16, 32};
};

// Which blocks a variant instantiates (parameter count is a pure function of
// the config).
bool uses_gcff(Variant v);      // recurrent gated cell + init conv
bool uses_gatefree(Variant v);  // plain conv confidence head
bool uses_cm(Variant v);        // residual U-Net + mu + trailing DC
int confidence_channels(Variant v);

nn::ParamSet build_params(const ModelConfig& cfg, std::uint64_t seed);
std::int64_t param_count(const ModelConfig& cfg);

// ---- submodule forwards (also exercised directly by tests) ----

// r = x - alpha * A*(A x - y)
ad::Var gradient_step(const ad::Var& x, const Tensor& y, const Tensor& csm, const Tensor& mask,
                      const ad::Var& alpha);

struct SparseOut {
  ad::Var x_s;
  ad::Var r_s;   // pre-shrinkage gradient-step image
  ad::Var sym;   // || Gt(G(r_s)) - r_s ||^2 (scalar)
};
SparseOut ns_forward(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x,
                     const Tensor& y, const Tensor& csm, const Tensor& mask);

ad::Var nl_forward(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x,
                   const Tensor& y, const Tensor& csm, const Tensor& mask);

struct GcffState {
  ad::Var c, h;
};
GcffState init_state(const nn::Binding& b, const ModelConfig& cfg, const Tensor& x0);

struct GcffOut {
  GcffState state;
  ad::Var m;  // [confidence_channels, H, W]
};
GcffOut gcff_step(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x_s,
                  const ad::Var& x_l, const GcffState& state);

// Convex per-pixel blends; the map must lie in [0,1].
ad::Var rc_weight(const ad::Var& x_s, const ad::Var& x_l, const ad::Var& m_r);
ad::Var oc_blend(const ad::Var& x_a, const ad::Var& x_r, const ad::Var& m_o);

ad::Var correct(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x_a);

// ---- full network ----

struct CocaOut {
  ad::Var x;
  GcffState state;
  ad::Var r_s;
  ad::Var sym;
};
CocaOut coca_forward(const nn::Binding& b, const ModelConfig& cfg, int k, const ad::Var& x_prev,
                     const GcffState& state, const Tensor& y, const Tensor& csm,
                     const Tensor& mask);

struct ForwardResult {
  Tensor x0;                // zero-filled initialization A*y
  std::vector<ad::Var> x;   // intermediates x^1..x^K
  std::vector<ad::Var> rs;  // per-cascade r_s
  std::vector<ad::Var> sym;
};
ForwardResult mcunet_forward(const nn::Binding& b, const ModelConfig& cfg, const Tensor& y,
                             const Tensor& csm, const Tensor& mask);

// ---- analytic cost model ----
// Convention: 2*H*W*cin*cout*k^2 per convolution; llround(5*n*log2(n)) per
// length-n FFT line (a 2D transform is H rows + W columns); one operation per
// coil-element for the elementwise encode/decode/blend stages.

struct FlopsReport {
  std::int64_t init = 0;      // zero-filled image + state initialization
  std::int64_t per_coca = 0;  // identical for every cascade; sum of the parts below
  std::int64_t sparse = 0, lowrank = 0, gsam = 0, fuse = 0, correction = 0, dc = 0;
  std::int64_t total(int k) const { return init + static_cast<std::int64_t>(k) * per_coca; }
};
FlopsReport count_flops(const ModelConfig& cfg, int h, int w, int coils);

inline double to_gflops(std::int64_t n) { return static_cast<double>(n) * 1e-9; }

}  // namespace mcu

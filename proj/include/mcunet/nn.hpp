#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mcunet/autodiff.hpp"
#include "mcunet/rng.hpp"
#include "mcunet/tensor.hpp"

namespace mcu::nn {

// Named parameter registry. Names are stable across runs (they key the
// checkpoint format) and items keep creation order.
struct ParamSet {
  std::vector<std::pair<std::string, Tensor>> items;
  std::unordered_map<std::string, std::size_t> index;

  Tensor& add(const std::string& name, Tensor init);
  bool has(const std::string& name) const { return index.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::int64_t total_size() const;
};

// Wraps every parameter tensor into one graph node per step. trainable=false
// binds constants (inference without tape bookkeeping).
struct Binding {
  explicit Binding(const ParamSet& ps, bool trainable = true);
  ad::Var operator[](const std::string& name) const;
  std::vector<ad::Var> vars;  // parallel to ParamSet::items

private:
  const ParamSet* ps_;
};

// He-normal fan-in initialization for conv weights; biases start at zero.
Tensor kaiming_conv(Rng& rng, int cout, int cin, int k);

// Registers "<prefix>.w" / "<prefix>.b" and applies the convolution.
void add_conv(ParamSet& ps, Rng& rng, const std::string& prefix, int cin, int cout, int k,
              bool zero_init = false);
ad::Var conv(const Binding& b, const std::string& prefix, const ad::Var& x);

// U-Net over [in_ch,H,W]: per entry of `ch` an encoder stage of two 3x3
// convs (rectifier) followed by a 2x2 ceil max pool; a two-conv bottleneck at
// ch.back(); a mirrored decoder with nearest upsampling back to the recorded
// stage size and skip concatenation; and a linear 3x3 output conv. Works at
// any spatial size >= 1 (pooling saturates at 1x1), so the parameter count
// depends only on the spec.
struct UNetSpec {
  std::vector<int> ch;
  int in_ch = 2;
  int out_ch = 2;
  bool zero_final = false;
};

void add_unet(ParamSet& ps, Rng& rng, const std::string& prefix, const UNetSpec& spec);
ad::Var unet(const Binding& b, const std::string& prefix, const UNetSpec& spec, const ad::Var& x);
std::int64_t unet_param_count(const UNetSpec& spec);

// Analytic multiply-add count: 2*H*W*cin*cout*k*k per conv plus one per
// element for each activation, replayed over the exact stage geometry.
std::int64_t unet_flops(const UNetSpec& spec, int h, int w);

inline std::int64_t conv_param_count(int cin, int cout, int k) {
  return static_cast<std::int64_t>(cout) * cin * k * k + cout;
}
inline std::int64_t conv_flops(int h, int w, int cin, int cout, int k) {
  return 2LL * h * w * cin * cout * k * k;
}

}  // namespace mcu::nn

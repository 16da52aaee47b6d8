#include "mcunet/nn.hpp"

#include <cmath>

#include "mcunet/kernels.hpp"

namespace mcu::nn {

Tensor& ParamSet::add(const std::string& name, Tensor init) {
  require(index.count(name) == 0, "ParamSet: duplicate parameter " + name);
  index.emplace(name, items.size());
  items.emplace_back(name, std::move(init));
  return items.back().second;
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = index.find(name);
  require(it != index.end(), "ParamSet: unknown parameter " + name);
  return items[it->second].second;
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = index.find(name);
  require(it != index.end(), "ParamSet: unknown parameter " + name);
  return items[it->second].second;
}

std::int64_t ParamSet::total_size() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : items) n += t.numel();
  return n;
}

Binding::Binding(const ParamSet& ps, bool trainable) : ps_(&ps) {
  vars.reserve(ps.items.size());
  for (const auto& [name, t] : ps.items)
    vars.push_back(trainable ? ad::param(t) : ad::constant(t));
}

ad::Var Binding::operator[](const std::string& name) const {
  auto it = ps_->index.find(name);
  require(it != ps_->index.end(), "Binding: unknown parameter " + name);
  return vars[it->second];
}

Tensor kaiming_conv(Rng& rng, int cout, int cin, int k) {
  Tensor w({cout, cin, k, k});
  const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
  for (std::size_t i = 0; i < static_cast<std::size_t>(w.numel()); ++i)
    w[i] = std * rng.normal();
  return w;
}

void add_conv(ParamSet& ps, Rng& rng, const std::string& prefix, int cin, int cout, int k,
              bool zero_init) {
  ps.add(prefix + ".w",
         zero_init ? Tensor::zeros({cout, cin, k, k}) : kaiming_conv(rng, cout, cin, k));
  ps.add(prefix + ".b", Tensor::zeros({cout}));
}

ad::Var conv(const Binding& b, const std::string& prefix, const ad::Var& x) {
  return ad::conv2d(x, b[prefix + ".w"], b[prefix + ".b"]);
}

namespace {

struct ConvPlan {
  std::string name;
  int cin, cout, k;
  bool zero_init;
};

std::vector<ConvPlan> unet_plan(const UNetSpec& spec) {
  require(!spec.ch.empty(), "unet: empty channel plan");
  std::vector<ConvPlan> plan;
  int cur = spec.in_ch;
  const int n = static_cast<int>(spec.ch.size());
  for (int i = 0; i < n; ++i) {
    plan.push_back({"enc" + std::to_string(i) + ".c0", cur, spec.ch[i], 3, false});
    plan.push_back({"enc" + std::to_string(i) + ".c1", spec.ch[i], spec.ch[i], 3, false});
    cur = spec.ch[i];
  }
  plan.push_back({"bott.c0", cur, cur, 3, false});
  plan.push_back({"bott.c1", cur, cur, 3, false});
  for (int i = n - 1; i >= 0; --i) {
    plan.push_back({"dec" + std::to_string(i) + ".c0", cur + spec.ch[i], spec.ch[i], 3, false});
    plan.push_back({"dec" + std::to_string(i) + ".c1", spec.ch[i], spec.ch[i], 3, false});
    cur = spec.ch[i];
  }
  plan.push_back({"final", cur, spec.out_ch, 3, spec.zero_final});
  return plan;
}

}  // namespace

void add_unet(ParamSet& ps, Rng& rng, const std::string& prefix, const UNetSpec& spec) {
  for (const auto& p : unet_plan(spec))
    add_conv(ps, rng, prefix + "." + p.name, p.cin, p.cout, p.k, p.zero_init);
}

ad::Var unet(const Binding& b, const std::string& prefix, const UNetSpec& spec, const ad::Var& x) {
  require(x->value.ndim() == 3 && x->value.dim(0) == spec.in_ch,
          "unet: input channel mismatch, got " + x->value.shape_str());
  const int n = static_cast<int>(spec.ch.size());
  std::vector<ad::Var> skips;
  std::vector<std::pair<int, int>> sizes;
  ad::Var cur = x;
  for (int i = 0; i < n; ++i) {
    std::string s = prefix + ".enc" + std::to_string(i);
    cur = ad::relu(conv(b, s + ".c0", cur));
    cur = ad::relu(conv(b, s + ".c1", cur));
    skips.push_back(cur);
    sizes.emplace_back(cur->value.dim(1), cur->value.dim(2));
    cur = ad::maxpool2(cur);
  }
  cur = ad::relu(conv(b, prefix + ".bott.c0", cur));
  cur = ad::relu(conv(b, prefix + ".bott.c1", cur));
  for (int i = n - 1; i >= 0; --i) {
    std::string s = prefix + ".dec" + std::to_string(i);
    cur = ad::upsample_to(cur, sizes[i].first, sizes[i].second);
    cur = ad::concat_ch({cur, skips[i]});
    cur = ad::relu(conv(b, s + ".c0", cur));
    cur = ad::relu(conv(b, s + ".c1", cur));
  }
  return conv(b, prefix + ".final", cur);
}

std::int64_t unet_param_count(const UNetSpec& spec) {
  std::int64_t total = 0;
  for (const auto& p : unet_plan(spec)) total += conv_param_count(p.cin, p.cout, p.k);
  return total;
}

std::int64_t unet_flops(const UNetSpec& spec, int h, int w) {
  const int n = static_cast<int>(spec.ch.size());
  std::int64_t total = 0;
  // conv pair + rectifiers at (h,w,c): the activation costs one op per element
  auto stage = [&](int hh, int ww, int cin, int cmid) {
    total += conv_flops(hh, ww, cin, cmid, 3) + static_cast<std::int64_t>(cmid) * hh * ww;
    total += conv_flops(hh, ww, cmid, cmid, 3) + static_cast<std::int64_t>(cmid) * hh * ww;
  };
  std::vector<std::pair<int, int>> sizes;
  int hh = h, ww = w, cur = spec.in_ch;
  for (int i = 0; i < n; ++i) {
    stage(hh, ww, cur, spec.ch[i]);
    sizes.emplace_back(hh, ww);
    cur = spec.ch[i];
    // pooling: one comparison per input element
    total += static_cast<std::int64_t>(cur) * hh * ww;
    hh = kernels::pool_out(hh);
    ww = kernels::pool_out(ww);
  }
  stage(hh, ww, cur, cur);
  for (int i = n - 1; i >= 0; --i) {
    hh = sizes[i].first;
    ww = sizes[i].second;
    // nearest upsample: one copy per output element
    total += static_cast<std::int64_t>(cur) * hh * ww;
    stage(hh, ww, cur + spec.ch[i], spec.ch[i]);
    cur = spec.ch[i];
  }
  total += conv_flops(hh, ww, cur, spec.out_ch, 3);
  return total;
}

}  // namespace mcu::nn

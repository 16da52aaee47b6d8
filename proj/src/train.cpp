#include "mcunet/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mcunet/mri_ops.hpp"
#include "mcunet/rng.hpp"

namespace mcu::train {

using nlohmann::json;

std::vector<double> gamma1_schedule(int k) {
  require(k >= 1, "gamma1_schedule: k must be >= 1");
  if (k == 1) return {1.0};
  std::vector<double> g(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i)
    g[static_cast<std::size_t>(i - 1)] = std::pow(10.0, static_cast<double>(i - k) / (k - 1));
  return g;
}

LossWeights make_weights(int k, bool include_ssim) {
  return LossWeights{gamma1_schedule(k), 0.01, include_ssim};
}

namespace {

// valid-window mean of num/den (deficit=false) or (den-num)/den (true)
ad::Var ssim_mean(const ad::Var& x, const Tensor& ref, double data_range,
                  const metrics::SsimParams& p, bool deficit) {
  require_shape(x->value, ref.shape(), "ssim_graph");
  require(ref.ndim() == 3 && ref.dim(0) == 2, "ssim_graph: expected [2,h,w]");
  require(data_range > 0.0, "ssim_graph: data_range must be positive");
  const int h = ref.dim(1), w = ref.dim(2), win = p.window;
  require(h >= win && w >= win, "ssim_graph: image " + ref.shape_str() + " smaller than the " +
                                    std::to_string(win) + " window");

  Tensor wt({1, 1, win, win});
  std::vector<double> g = metrics::gaussian_window(win, p.sigma);
  for (std::size_t i = 0; i < g.size(); ++i) wt[static_cast<std::int64_t>(i)] = g[i];
  ad::Var kw = ad::constant(wt);
  ad::Var kb = ad::constant(Tensor::zeros({1}));
  auto blur = [&](const ad::Var& v) { return ad::conv2d(v, kw, kb); };

  ad::Var mx = ad::magnitude(x);
  ad::Var my = ad::magnitude(ad::constant(ref));
  ad::Var mux = blur(mx), muy = blur(my);
  ad::Var sx2 = ad::sub(blur(ad::mul(mx, mx)), ad::mul(mux, mux));
  ad::Var sy2 = ad::sub(blur(ad::mul(my, my)), ad::mul(muy, muy));
  ad::Var sxy = ad::sub(blur(ad::mul(mx, my)), ad::mul(mux, muy));

  const double c1 = (p.k1 * data_range) * (p.k1 * data_range);
  const double c2 = (p.k2 * data_range) * (p.k2 * data_range);
  ad::Var num = ad::mul(ad::add_const(ad::scale(ad::mul(mux, muy), 2.0), c1),
                        ad::add_const(ad::scale(sxy, 2.0), c2));
  ad::Var den = ad::mul(ad::add_const(ad::add(ad::mul(mux, mux), ad::mul(muy, muy)), c1),
                        ad::add_const(ad::add(sx2, sy2), c2));
  ad::Var map = deficit ? ad::div(ad::sub(den, num), den) : ad::div(num, den);

  // same-padded blurs pollute border windows; only interior ones count
  Tensor valid = Tensor::zeros({1, h, w});
  const int half = win / 2;
  std::int64_t count = 0;
  for (int i = half; i < h - half; ++i)
    for (int j = half; j < w - half; ++j) {
      valid.at(0, i, j) = 1.0;
      ++count;
    }
  return ad::scale(ad::sum_v(ad::mul(map, ad::constant(valid))), 1.0 / static_cast<double>(count));
}

}  // namespace

ad::Var ssim_graph(const ad::Var& x, const Tensor& ref, double data_range,
                   const metrics::SsimParams& p) {
  return ssim_mean(x, ref, data_range, p, false);
}

ad::Var ssim_deficit_graph(const ad::Var& x, const Tensor& ref, double data_range,
                           const metrics::SsimParams& p) {
  return ssim_mean(x, ref, data_range, p, true);
}

LossBreakdown composite_loss(const std::vector<ad::Var>& xs, const std::vector<ad::Var>& syms,
                             const Tensor& xgt, const LossWeights& w) {
  const std::size_t k = w.gamma1.size();
  require(k >= 1, "composite_loss: empty weight schedule");
  require(xs.size() == k && syms.size() == k,
          "composite_loss: got " + std::to_string(xs.size()) + " intermediates and " +
              std::to_string(syms.size()) + " symmetry terms for k=" + std::to_string(k));

  Tensor mag_gt = metrics::magnitude_image(xgt);
  double range = max_abs(mag_gt);

  LossBreakdown out;
  ad::Var total;
  for (std::size_t i = 0; i < k; ++i) {
    ad::Var mse = ad::scale(ad::sum_sq(ad::sub(xs[i], ad::constant(xgt))),
                            1.0 / static_cast<double>(xgt.numel()));
    out.mse.push_back(ad::val(mse)[0]);
    ad::Var term = ad::scale(mse, w.gamma1[i]);
    if (w.include_ssim) {
      ad::Var ds = ssim_deficit_graph(xs[i], xgt, range);
      out.ssim_term.push_back(ad::val(ds)[0]);
      term = ad::add(term, ad::scale(ds, w.gamma1[i]));
    } else {
      out.ssim_term.push_back(0.0);
    }
    out.sym.push_back(ad::val(syms[i])[0]);
    term = ad::add(term, ad::scale(syms[i], w.gamma2));
    total = total ? ad::add(total, term) : term;
  }
  out.total = total;
  return out;
}

void Adam::init(const nn::ParamSet& ps) {
  t = 0;
  m.clear();
  v.clear();
  for (const auto& [name, p] : ps.items) {
    m.push_back(Tensor::zeros(p.shape()));
    v.push_back(Tensor::zeros(p.shape()));
  }
}

void Adam::step(nn::ParamSet& ps, const nn::Binding& b, double lr) {
  require(m.size() == ps.items.size(), "Adam::step: call init first");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < ps.items.size(); ++i) {
    Tensor& p = ps.items[i].second;
    const Tensor& grad = b.vars[i]->grad;
    const bool has_grad = !grad.empty();
    for (std::int64_t e = 0; e < p.numel(); ++e) {
      double g = has_grad ? grad[e] : 0.0;
      m[i][e] = beta1 * m[i][e] + (1.0 - beta1) * g;
      v[i][e] = beta2 * v[i][e] + (1.0 - beta2) * g * g;
      p[e] -= lr * (m[i][e] / bc1) / (std::sqrt(v[i][e] / bc2) + eps);
    }
  }
}

Trainer::Trainer(const ModelConfig& mc, const TrainConfig& tc) : mc_(mc), tc_(tc) {
  require(tc.epochs >= 1 && tc.lr >= 0.0 && tc.batch >= 1 && tc.checkpoint_every >= 1,
          "Trainer: bad train config");
  params_ = build_params(mc_, derive_seed(tc_.seed, "init"));
  opt_.init(params_);
}

void Trainer::restore(const ckpt::Checkpoint& c) {
  require(ckpt::config_to_json(c.config) == ckpt::config_to_json(mc_),
          "Trainer::restore: checkpoint config does not match");
  params_ = c.params;
  if (!c.optim.m.empty()) {
    opt_.m = c.optim.m;
    opt_.v = c.optim.v;
    opt_.t = c.optim.step;
  } else {
    opt_.init(params_);
  }
  start_epoch_ = c.extra.value("epoch", -1) + 1;
}

ckpt::Checkpoint Trainer::snapshot(int completed_epoch, const TrainResult& r) const {
  ckpt::Checkpoint c;
  c.config = mc_;
  c.params = params_;
  c.optim.step = opt_.t;
  c.optim.m = opt_.m;
  c.optim.v = opt_.v;
  c.extra = json{{"epoch", completed_epoch},
                 {"seed", tc_.seed},
                 {"best_epoch", r.best_epoch},
                 {"best_val_psnr", r.best_val_psnr}};
  if (geo_h_ > 0)
    c.extra["data"] = json{{"coils", geo_coils_}, {"height", geo_h_}, {"width", geo_w_}};
  return c;
}

namespace {

void check_finite(const LossBreakdown& lb, int step) {
  auto bad = [](double x) { return !std::isfinite(x); };
  for (std::size_t i = 0; i < lb.mse.size(); ++i) {
    std::string where = " in cascade " + std::to_string(i + 1) + " at step " + std::to_string(step);
    if (bad(lb.mse[i])) throw std::runtime_error("non-finite mse term" + where);
    if (bad(lb.ssim_term[i])) throw std::runtime_error("non-finite ssim term" + where);
    if (bad(lb.sym[i])) throw std::runtime_error("non-finite symmetry term" + where);
  }
  if (bad(ad::val(lb.total)[0]))
    throw std::runtime_error("non-finite total loss at step " + std::to_string(step));
}

}  // namespace

TrainResult Trainer::run(const simdata::Dataset& tr, const simdata::Dataset& val,
                         const std::string& log_path, const std::string& ckpt_dir) {
  require(!tr.slices.empty(), "Trainer::run: empty training dataset");
  geo_coils_ = tr.coils;
  geo_h_ = tr.h;
  geo_w_ = tr.w;
  LossWeights w = make_weights(mc_.k, tc_.include_ssim);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::app);
    require(log.good(), "Trainer::run: cannot open log " + log_path);
  }

  TrainResult result;
  const int n = static_cast<int>(tr.slices.size());
  for (int epoch = start_epoch_; epoch < tc_.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(tc_.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, mse_sum = 0.0, ssim_sum = 0.0, sym_sum = 0.0;
    int steps_this_epoch = 0, terms = 0;
    for (int pos = 0; pos < n; pos += tc_.batch) {
      const int bs = std::min(tc_.batch, n - pos);
      nn::Binding b(params_, true);
      ad::Var batch_total;
      for (int s = 0; s < bs; ++s) {
        const simdata::Slice& sl = tr.slices[static_cast<std::size_t>(order[static_cast<std::size_t>(pos + s)])];
        ForwardResult fr = mcunet_forward(b, mc_, sl.y, sl.csm, sl.mask);
        LossBreakdown lb = composite_loss(fr.x, fr.sym, sl.xgt, w);
        check_finite(lb, static_cast<int>(opt_.t) + 1);
        for (std::size_t i = 0; i < lb.mse.size(); ++i) {
          mse_sum += lb.mse[i];
          ssim_sum += lb.ssim_term[i];
          sym_sum += lb.sym[i];
          ++terms;
        }
        batch_total = batch_total ? ad::add(batch_total, lb.total) : lb.total;
      }
      if (bs > 1) batch_total = ad::scale(batch_total, 1.0 / bs);
      ad::backward(batch_total);
      opt_.step(params_, b, tc_.lr);
      double step_val = ad::val(batch_total)[0];
      result.step_loss.push_back(step_val);
      loss_sum += step_val;
      ++steps_this_epoch;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = opt_.t;
    rec.train_loss = loss_sum / steps_this_epoch;
    rec.mse = mse_sum / terms;
    rec.ssim_term = ssim_sum / terms;
    rec.sym = sym_sum / terms;

    double psnr_sum = 0.0, ssim_val_sum = 0.0;
    bool ssim_ok = true;
    for (const simdata::Slice& sl : val.slices) {
      SliceMetrics sm = eval_slice(mc_, params_, sl);
      psnr_sum += sm.psnr;
      if (std::isnan(sm.ssim))
        ssim_ok = false;
      else
        ssim_val_sum += sm.ssim;
    }
    const double nv = static_cast<double>(val.slices.size());
    rec.val_psnr = val.slices.empty() ? std::nan("") : psnr_sum / nv;
    rec.val_ssim = (val.slices.empty() || !ssim_ok) ? std::nan("") : ssim_val_sum / nv;
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(rec);

    if (!std::isnan(rec.val_psnr) && rec.val_psnr > result.best_val_psnr) {
      result.best_val_psnr = rec.val_psnr;
      result.best_epoch = epoch;
      result.best_params = params_;
      if (!ckpt_dir.empty())
        ckpt::save_checkpoint((std::filesystem::path(ckpt_dir) / "best").string(),
                              snapshot(epoch, result));
    }
    if (!ckpt_dir.empty() && ((epoch + 1) % tc_.checkpoint_every == 0 || epoch + 1 == tc_.epochs))
      ckpt::save_checkpoint((std::filesystem::path(ckpt_dir) / "last").string(),
                            snapshot(epoch, result));

    if (log.is_open()) {
      json rj{{"epoch", rec.epoch},         {"step", rec.step},
              {"train_loss", rec.train_loss}, {"mse", rec.mse},
              {"ssim_term", rec.ssim_term}, {"sym", rec.sym},
              {"val_psnr", rec.val_psnr},   {"val_ssim", rec.val_ssim},
              {"wall_s", rec.wall_s}};
      log << rj.dump() << "\n";
      log.flush();
    }
  }
  if (result.best_epoch < 0) result.best_params = params_;
  return result;
}

Tensor reconstruct(const ModelConfig& mc, const nn::ParamSet& ps, const simdata::Slice& sl) {
  nn::Binding b(ps, false);
  ForwardResult fr = mcunet_forward(b, mc, sl.y, sl.csm, sl.mask);
  return ad::val(fr.x.back());
}

namespace {

SliceMetrics metrics_for(const Tensor& recon, const simdata::Slice& sl) {
  SliceMetrics sm;
  Tensor mg = metrics::magnitude_image(sl.xgt);
  Tensor mx = metrics::magnitude_image(recon);
  double range = max_abs(mg);
  sm.psnr = metrics::psnr(mx, mg, range);
  metrics::SsimParams sp;
  if (sl.xgt.dim(1) >= sp.window && sl.xgt.dim(2) >= sp.window)
    sm.ssim = metrics::ssim(mx, mg, range, sp);
  else
    sm.ssim = std::nan("");
  return sm;
}

}  // namespace

SliceMetrics eval_slice(const ModelConfig& mc, const nn::ParamSet& ps, const simdata::Slice& sl) {
  return metrics_for(reconstruct(mc, ps, sl), sl);
}

SliceMetrics zero_filled_metrics(const simdata::Slice& sl) {
  return metrics_for(adjoint_model(sl.y, sl.csm, sl.mask), sl);
}

}  // namespace mcu::train

// Release gate. Each criterion prints exactly one PASS/FAIL line with its
// measured numbers; the process exits with the number of failed criteria.
// Budgets are wall-clock seconds on a single core.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "mcunet/checkpoint.hpp"
#include "mcunet/cli.hpp"
#include "mcunet/config.hpp"
#include "mcunet/fft.hpp"
#include "mcunet/hankel.hpp"
#include "mcunet/kernels.hpp"
#include "mcunet/metrics.hpp"
#include "mcunet/model.hpp"
#include "mcunet/mri_ops.hpp"
#include "mcunet/simdata.hpp"
#include "mcunet/train.hpp"
#include "test_helpers.hpp"

using namespace mcu;
using mcu::testing::max_diff;
using mcu::testing::normalized_csm;
using mcu::testing::randn;
using mcu::testing::random_mask;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and budgets ----
constexpr double kAdjointTol = 1e-5;
constexpr double kFftTol = 1e-6;
constexpr double kReduceExpandTol = 1e-6;
constexpr double kOperatorBudgetS = 10.0;

constexpr double kCommuteTol = 1e-8;
constexpr double kQUpdateTol = 1e-8;
constexpr double kIrlsTol = 1e-3;
constexpr double kLowRankBudgetS = 30.0;

constexpr double kWiringTol = 1e-6;
constexpr double kClosedFormTol = 1e-12;

constexpr double kGradTol = 1e-3;
constexpr double kGradStep = 1e-5;
constexpr double kGradBudgetS = 300.0;

constexpr double kOverfitGainDb = 3.0;
constexpr int kOverfitMaxSteps = 500;
constexpr double kHeldOutGainDb = 1.0;
constexpr double kDeskBudgetS = 1800.0;

constexpr double kFlopsRatioRef = 2.509;
constexpr double kFlopsRatioTol = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("tmp_acceptance") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& s) const { return (path / s).string(); }
};

ModelConfig tiny_config(Variant v, int k = 1) {
  ModelConfig cfg;
  cfg.k = k;
  cfg.variant = v;
  cfg.sparse_width = 8;
  cfg.lowrank_ch = {4, 8};
  cfg.gsam_hidden = 4;
  cfg.correction_ch = {2, 4};
  return cfg;
}

struct Problem {
  Tensor gt, csm, mask, y;
};

Problem random_problem(Rng& rng, int coils, int h, int w) {
  Problem p;
  p.gt = randn(rng, {2, h, w});
  p.csm = normalized_csm(rng, coils, h, w);
  p.mask = random_mask(rng, h, w, 0.5);
  p.y = apply_mask(forward_model(p.gt, p.csm, p.mask), p.mask);
  Tensor noise = randn(rng, {coils, 2, h, w}, 0.02);
  for (std::size_t i = 0; i < p.y.numel(); ++i) p.y[i] += noise[i];
  p.y = apply_mask(p.y, p.mask);
  return p;
}

void fill_zero(Tensor& t) { std::fill(t.data(), t.data() + t.numel(), 0.0); }

void zero_matching(nn::ParamSet& ps, const std::string& prefix) {
  for (auto& [name, t] : ps.items)
    if (name.rfind(prefix, 0) == 0) fill_zero(t);
}

double softplus0() { return kernels::unary_eval(kernels::Unary::Softplus, 0.0); }

double rel_sig_err(const Tensor& a, const Tensor& b) {
  Tensor d = a;
  for (std::size_t i = 0; i < d.numel(); ++i) d[i] -= b[i];
  return norm2(d) / norm2(b);
}

// ---- criterion 1: operator correctness ----

Outcome criterion_operators() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(9000, "acc-ops"));

  double adj = 0.0;
  for (int h : {16, 32})
    for (int c : {1, 4})
      for (int t = 0; t < 25; ++t) {
        Tensor csm = normalized_csm(rng, c, h, h);
        Tensor mask = random_mask(rng, h, h, 0.4);
        Tensor x = randn(rng, {2, h, h});
        Tensor k = randn(rng, {c, 2, h, h});
        const double lhs = dot(forward_model(x, csm, mask), k);
        const double rhs = dot(x, adjoint_model(k, csm, mask));
        adj = std::max(adj, std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12}));
      }

  double fft = 0.0;
  for (int h : {16, 32})
    for (int t = 0; t < 10; ++t) {
      Tensor x = randn(rng, {2, h, h});
      Tensor k = fft2c(x);
      Tensor back = ifft2c(k);
      double peak = 0.0;
      for (std::size_t i = 0; i < x.numel(); ++i) peak = std::max(peak, std::abs(x[i]));
      fft = std::max(fft, max_diff(back, x) / peak);
      const double ex = dot(x, x), ek = dot(k, k);
      fft = std::max(fft, std::abs(ex - ek) / ex);
    }

  double re = 0.0;
  for (int c : {1, 4})
    for (int t = 0; t < 10; ++t) {
      Tensor csm = normalized_csm(rng, c, 16, 16);
      Tensor x = randn(rng, {2, 16, 16});
      double peak = 0.0;
      for (std::size_t i = 0; i < x.numel(); ++i) peak = std::max(peak, std::abs(x[i]));
      re = std::max(re, max_diff(reduce(expand(x, csm), csm), x) / peak);
    }

  const double wall = seconds_since(t0);
  Outcome o;
  o.pass = adj <= kAdjointTol && fft <= kFftTol && re <= kReduceExpandTol &&
           wall < kOperatorBudgetS;
  o.detail = fmt("adjoint %.2e (tol %.0e), fft %.2e (tol %.0e), reduce-expand %.2e (tol %.0e)",
                 adj, kAdjointTol, fft, kFftTol, re, kReduceExpandTol);
  return o;
}

// ---- criterion 2: structured low-rank math ----

Outcome criterion_lowrank() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(9001, "acc-lowrank"));

  double commute = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = 8 + rng.uniform_int(0, 6);
    const int ww = 2 + rng.uniform_int(0, 2);
    Tensor x = randn(rng, {2, 1, n});
    Tensor other = randn(rng, {2, 1, n});
    Eigen::MatrixXcd q = hankel::q_update(other, {1, ww}, 0.3);
    hankel::Commutation c = hankel::commutation_check(x, q, {1, ww});
    commute = std::max(commute, std::abs(c.lhs - c.rhs) / std::max(c.lhs, 1e-300));
  }

  double qerr = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int n = 10 + rng.uniform_int(0, 4);
    const int ww = 3;
    Tensor x = randn(rng, {2, 1, n});
    Eigen::MatrixXcd got = hankel::q_update(x, {1, ww}, 0.7);
    Eigen::MatrixXcd tau = hankel::hankel_lift(x, {1, ww});
    Eigen::MatrixXcd g =
        tau.adjoint() * tau + 0.7 * Eigen::MatrixXcd::Identity(ww, ww);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g);
    Eigen::VectorXcd d(ww);
    for (int i = 0; i < ww; ++i) d(i) = std::pow(es.eigenvalues()(i), -0.25);
    Eigen::MatrixXcd want = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
    qerr = std::max(qerr, (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff());
  }

  // rank-one exponential at 2x undersampling, recovered by the reweighted
  // recursion from the zero-filled start
  const int n = 16;
  Tensor gt({2, 1, n});
  const std::complex<double> z = std::exp(std::complex<double>(0.0, 0.35));
  std::complex<double> v(1.0, 0.0);
  for (int t = 0; t < n; ++t, v *= z) {
    gt[t] = v.real();
    gt[n + t] = v.imag();
  }
  Tensor csm = Tensor::full({1, 2, 1, n}, 0.0);
  for (int t = 0; t < n; ++t) csm[t] = 1.0;
  Tensor mask({1, n});
  for (int t = 4; t < 12; ++t) mask[t] = 1.0;
  Tensor y = apply_mask(forward_model(gt, csm, mask), mask);
  Tensor x0 = adjoint_model(y, csm, mask);
  const double start = rel_sig_err(x0, gt);
  hankel::IrlsResult res = hankel::irls_iterate(x0, y, csm, mask, {1, 4}, 3e-4, 0.5, 1e-4, 10000);
  const double rec = rel_sig_err(res.x, gt);

  const double wall = seconds_since(t0);
  Outcome o;
  o.pass = commute <= kCommuteTol && qerr <= kQUpdateTol && start > 1e-2 && !res.diverged &&
           rec <= kIrlsTol && wall < kLowRankBudgetS;
  o.detail = fmt("commutation %.2e (tol %.0e), q-update %.2e (tol %.0e), recovery %.2e from %.2e "
                 "(tol %.0e)",
                 commute, kCommuteTol, qerr, kQUpdateTol, rec, start, kIrlsTol);
  return o;
}

// ---- criterion 3: gate and fusion algebra ----

Outcome criterion_gates() {
  Rng rng(derive_seed(9002, "acc-gates"));
  bool in_range = true;
  for (Variant v : {Variant::original, Variant::no_rc, Variant::no_oc})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ModelConfig cfg = tiny_config(v);
      nn::ParamSet ps = build_params(cfg, 100 + seed);
      nn::Binding b(ps, false);
      GcffOut go = gcff_step(b, cfg, 0, ad::constant(randn(rng, {2, 8, 8})),
                             ad::constant(randn(rng, {2, 8, 8})),
                             init_state(b, cfg, randn(rng, {2, 8, 8})));
      for (std::size_t i = 0; i < go.m->value.numel(); ++i)
        in_range = in_range && go.m->value[i] > 0.0 && go.m->value[i] < 1.0;
    }

  Tensor a = randn(rng, {2, 6, 6}), bb = randn(rng, {2, 6, 6});
  Tensor m({1, 6, 6});
  for (std::size_t i = 0; i < m.numel(); ++i) m[i] = rng.uniform();
  ad::Var va = ad::constant(a), vb = ad::constant(bb), vm = ad::constant(m);
  ad::Var ones = ad::constant(Tensor::full({1, 6, 6}, 1.0));
  ad::Var zeros = ad::constant(Tensor::full({1, 6, 6}, 0.0));
  const bool blends_exact = max_diff(ad::val(rc_weight(va, vb, ones)), a) == 0.0 &&
                            max_diff(ad::val(rc_weight(va, vb, zeros)), bb) == 0.0 &&
                            max_diff(ad::val(oc_blend(va, vb, ones)), a) == 0.0 &&
                            max_diff(ad::val(oc_blend(va, vb, zeros)), bb) == 0.0 &&
                            max_diff(ad::val(oc_blend(va, va, vm)), a) == 0.0;

  ModelConfig cfg = tiny_config(Variant::original);
  nn::ParamSet ps = build_params(cfg, 6);
  for (auto& [name, t] : ps.items) fill_zero(t);
  nn::Binding b(ps, false);
  GcffOut go = gcff_step(b, cfg, 0, ad::constant(randn(rng, {2, 8, 8})),
                         ad::constant(randn(rng, {2, 8, 8})),
                         init_state(b, cfg, randn(rng, {2, 8, 8})));
  bool half = true;
  for (std::size_t i = 0; i < go.m->value.numel(); ++i) half = half && go.m->value[i] == 0.5;

  Outcome o;
  o.pass = in_range && blends_exact && half;
  o.detail = fmt("maps in (0,1): %s, blend endpoints exact: %s, zero-parameter map == 0.5: %s",
                 in_range ? "yes" : "NO", blends_exact ? "yes" : "NO", half ? "yes" : "NO");
  return o;
}

// ---- criterion 4: cascade wiring identities ----

Outcome criterion_wiring() {
  Rng rng(derive_seed(9003, "acc-wiring"));
  Problem p = random_problem(rng, 2, 8, 8);

  ModelConfig cfg = tiny_config(Variant::original);
  nn::ParamSet ps = build_params(cfg, 9);
  zero_matching(ps, "winit");
  zero_matching(ps, "coca0.gcff.");
  zero_matching(ps, "coca0.nr.");
  ps.get("coca0.mu_raw")[0] = 0.0;
  nn::Binding b(ps, false);
  ad::Var x = ad::constant(randn(rng, {2, 8, 8}));
  Tensor xs = ad::val(ns_forward(b, cfg, 0, x, p.y, p.csm, p.mask).x_s);
  Tensor xl = ad::val(nl_forward(b, cfg, 0, x, p.y, p.csm, p.mask));
  Tensor xm(xs.shape());
  for (std::size_t i = 0; i < xm.numel(); ++i) xm[i] = 0.5 * (xs[i] + xl[i]);
  Tensor expected = dc_project(xm, p.y, p.csm, p.mask, softplus0());
  CocaOut co = coca_forward(b, cfg, 0, x, init_state(b, cfg, ad::val(x)), p.y, p.csm, p.mask);
  const double coca_err = max_diff(ad::val(co.x), expected);

  double variant_err = 0.0;
  for (Variant v : all_variants()) {
    ModelConfig vc = tiny_config(v, 2);
    nn::ParamSet vp = build_params(vc, 10);
    for (auto& [name, t] : vp.items) fill_zero(t);
    ForwardResult r = mcunet_forward(nn::Binding(vp, false), vc, p.y, p.csm, p.mask);
    const bool plain_half = v == Variant::addition || v == Variant::no_correction;
    Tensor want = r.x0;
    for (int k = 0; k < 2; ++k) {
      Tensor half(want.shape());
      for (std::size_t i = 0; i < half.numel(); ++i) half[i] = 0.5 * want[i];
      want = plain_half ? half : dc_project(half, p.y, p.csm, p.mask, softplus0());
      variant_err =
          std::max(variant_err, max_diff(ad::val(r.x[static_cast<std::size_t>(k)]), want));
    }
  }

  Outcome o;
  o.pass = coca_err <= kWiringTol && variant_err <= kClosedFormTol;
  o.detail = fmt("muted cascade vs mean-fusion projection %.2e (tol %.0e), seven variant closed "
                 "forms %.2e (tol %.0e)",
                 coca_err, kWiringTol, variant_err, kClosedFormTol);
  return o;
}

// ---- criterion 5: differentiability ----

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(9004, "acc-grad"));
  Problem p = random_problem(rng, 2, 8, 8);
  Tensor x = randn(rng, {2, 8, 8});
  double worst = 0.0;
  int checked = 0;
  auto track = [&](const mcu::testing::GradCheck& r) {
    worst = std::max(worst, r.max_rel_err);
    checked += r.checked;
  };

  {  // shrinkage branch with its symmetry penalty
    ModelConfig cfg = tiny_config(Variant::addition);
    nn::ParamSet ps = build_params(cfg, 16);
    track(mcu::testing::grad_check_params(
        ps,
        [&](const nn::Binding& b) {
          SparseOut s = ns_forward(b, cfg, 0, ad::constant(x), p.y, p.csm, p.mask);
          return ad::add(ad::sum_sq(s.x_s), s.sym);
        },
        rng, {}, 5, kGradStep));
  }
  {  // low-rank branch
    ModelConfig cfg = tiny_config(Variant::addition);
    nn::ParamSet ps = build_params(cfg, 17);
    track(mcu::testing::grad_check_params(
        ps,
        [&](const nn::Binding& b) {
          return ad::sum_sq(nl_forward(b, cfg, 0, ad::constant(x), p.y, p.csm, p.mask));
        },
        rng, {}, 5, kGradStep));
  }
  {  // gated attention cell
    ModelConfig cfg = tiny_config(Variant::original);
    nn::ParamSet ps = build_params(cfg, 18);
    Tensor x0 = randn(rng, {2, 8, 8}), xs = randn(rng, {2, 8, 8}), xl = randn(rng, {2, 8, 8});
    std::vector<std::string> names{"winit.w", "winit.b"};
    for (const auto& [name, t] : ps.items)
      if (name.rfind("coca0.gcff.", 0) == 0) names.push_back(name);
    track(mcu::testing::grad_check_params(
        ps,
        [&](const nn::Binding& b) {
          GcffOut go =
              gcff_step(b, cfg, 0, ad::constant(xs), ad::constant(xl), init_state(b, cfg, x0));
          return ad::add(ad::sum_sq(go.m),
                         ad::add(ad::sum_sq(go.state.c), ad::sum_sq(go.state.h)));
        },
        rng, names, 5, kGradStep));
  }
  {  // gate-free confidence head, reached through its cascade
    ModelConfig cfg = tiny_config(Variant::no_gates);
    nn::ParamSet ps = build_params(cfg, 22);
    std::vector<std::string> names;
    for (const auto& [name, t] : ps.items)
      if (name.find("gatefree") != std::string::npos) names.push_back(name);
    track(mcu::testing::grad_check_params(
        ps,
        [&](const nn::Binding& b) {
          return ad::sum_sq(mcunet_forward(b, cfg, p.y, p.csm, p.mask).x.back());
        },
        rng, names, 5, kGradStep));
  }
  {  // correction stage
    ModelConfig cfg = tiny_config(Variant::original);
    nn::ParamSet ps = build_params(cfg, 19);
    std::vector<std::string> names;
    for (const auto& [name, t] : ps.items)
      if (name.rfind("coca0.nr.", 0) == 0) names.push_back(name);
    track(mcu::testing::grad_check_params(
        ps, [&](const nn::Binding& b) { return ad::sum_sq(correct(b, cfg, 0, ad::constant(x))); },
        rng, names, 4, kGradStep));
  }
  {  // end to end: two cascades, composite objective
    ModelConfig cfg = tiny_config(Variant::original, 2);
    nn::ParamSet ps = build_params(cfg, 20);
    train::LossWeights w = train::make_weights(2, false);
    track(mcu::testing::grad_check_params(
        ps,
        [&](const nn::Binding& b) {
          ForwardResult r = mcunet_forward(b, cfg, p.y, p.csm, p.mask);
          return train::composite_loss(r.x, r.sym, p.gt, w).total;
        },
        rng, {}, 2, kGradStep));
  }

  const double wall = seconds_since(t0);
  Outcome o;
  o.pass = worst <= kGradTol && wall < kGradBudgetS;
  o.detail = fmt("max rel err %.2e over %d sampled derivatives (tol %.0e, step %.0e)", worst,
                 checked, kGradTol, kGradStep);
  return o;
}

// ---- criterion 6: loss schedule ----

Outcome criterion_loss() {
  bool sched = true;
  for (int k : {1, 2, 3, 5, 10}) {
    std::vector<double> g = train::gamma1_schedule(k);
    sched = sched && static_cast<int>(g.size()) == k && g.back() == 1.0;
    for (std::size_t i = 1; i < g.size(); ++i) sched = sched && g[i] > g[i - 1];
  }
  const bool first_exact = train::gamma1_schedule(10)[0] == 0.1;

  Rng rng(derive_seed(9005, "acc-loss"));
  Tensor gt = randn(rng, {2, 16, 16});
  std::vector<ad::Var> xs{ad::constant(gt), ad::constant(gt)};
  std::vector<ad::Var> syms{ad::constant(Tensor::scalar(0.0)), ad::constant(Tensor::scalar(0.0))};
  train::LossBreakdown lb = train::composite_loss(xs, syms, gt, train::make_weights(2, true));
  const double at_perfect = ad::val(lb.total)[0];

  Outcome o;
  o.pass = sched && first_exact && at_perfect == 0.0;
  o.detail = fmt("schedule increasing with unit tail: %s, K=10 head == 0.1: %s, loss at the "
                 "perfect point %.1e",
                 sched ? "yes" : "NO", first_exact ? "yes" : "NO", at_perfect);
  return o;
}

// ---- criterion 7: desk-scale learning ----

double mean_gain_db(const ModelConfig& mc, const nn::ParamSet& ps, const simdata::Dataset& ds) {
  double rec = 0.0, zf = 0.0;
  for (const auto& sl : ds.slices) {
    rec += train::eval_slice(mc, ps, sl).psnr;
    zf += train::zero_filled_metrics(sl).psnr;
  }
  return (rec - zf) / static_cast<double>(ds.slices.size());
}

Outcome criterion_learning() {
  const auto t0 = std::chrono::steady_clock::now();

  // part one: overfit four slices within the step budget
  simdata::GenSpec gs;
  gs.count = 4;
  gs.coils = 4;
  gs.h = gs.w = 32;
  gs.mask.kind = simdata::MaskKind::cartesian_random;
  gs.mask.accel = 4.0;
  gs.noise_sigma = 0.01;
  gs.seed = derive_seed(9006, "acc-overfit");
  simdata::Dataset four = simdata::generate(gs);
  simdata::Dataset no_val;
  no_val.coils = four.coils;
  no_val.h = four.h;
  no_val.w = four.w;

  ModelConfig mc;  // reference widths at three cascades
  mc.k = 3;
  train::TrainConfig base;
  base.lr = 1e-3;
  base.seed = derive_seed(9006, "acc-overfit-train");

  // 125 epochs x 4 slices = the full step budget, trained in resumable
  // chunks so we can stop at the first chunk that clears the bar
  const int chunk_epochs = 25;
  double overfit_gain = 0.0;
  int steps_used = 0;
  ckpt::Checkpoint carry;
  bool resumed = false;
  for (int target = chunk_epochs; target <= 125; target += chunk_epochs) {
    train::TrainConfig tc = base;
    tc.epochs = target;
    train::Trainer t(mc, tc);
    if (resumed) t.restore(carry);
    train::TrainResult res = t.run(four, no_val);
    steps_used = static_cast<int>(res.epochs.back().step);
    overfit_gain = mean_gain_db(mc, t.params(), four);
    if (overfit_gain >= kOverfitGainDb) break;
    carry = t.snapshot(target - 1, res);
    resumed = true;
  }
  const bool overfit_ok = overfit_gain >= kOverfitGainDb && steps_used <= kOverfitMaxSteps;

  // part two: the full desk profile, then the held-out split
  TempDir td("desk");
  cfg::RunConfig rc = cfg::profile_config("desk");
  rc.output_root = td.sub("run");
  std::ostringstream log;
  cli::run_generate(rc, td.sub("run/data"), log);
  cli::run_train(rc, td.sub("run/data"), td.sub("run/train"), log);

  ckpt::Checkpoint best = ckpt::load_checkpoint(td.sub("run/train/checkpoints/best"));
  simdata::Dataset test = simdata::read_dataset(td.sub("run/data/test"));
  const double heldout_gain = mean_gain_db(best.config, best.params, test);
  const double wall = seconds_since(t0);

  Outcome o;
  o.pass = overfit_ok && heldout_gain >= kHeldOutGainDb && wall < kDeskBudgetS;
  o.detail = fmt("overfit gain %.2f dB after %d steps (need %.0f within %d), held-out gain %.2f "
                 "dB over 20 slices (need %.0f), %.0f s",
                 overfit_gain, steps_used, kOverfitGainDb, kOverfitMaxSteps, heldout_gain,
                 kHeldOutGainDb, wall);
  return o;
}

// ---- criterion 8: cost accounting ----

Outcome criterion_flops() {
  ModelConfig mc;  // reference widths
  const FlopsReport rep = count_flops(mc, 32, 32, 4);
  bool additive = true;
  for (int k = 1; k < 10; ++k) additive = additive && rep.total(k + 1) - rep.total(k) == rep.per_coca;
  additive = additive &&
             rep.per_coca == rep.sparse + rep.lowrank + rep.gsam + rep.fuse + rep.correction +
                                 rep.dc;

  const double ratio = static_cast<double>(rep.total(10)) / static_cast<double>(rep.total(4));
  const bool ratio_ok = std::abs(ratio - kFlopsRatioRef) / kFlopsRatioRef <= kFlopsRatioTol;

  ModelConfig add = mc;
  add.variant = Variant::addition;
  const std::int64_t fl_orig = count_flops(mc, 32, 32, 4).total(mc.k);
  const std::int64_t fl_add = count_flops(add, 32, 32, 4).total(add.k);

  Outcome o;
  o.pass = additive && ratio_ok && fl_add < fl_orig;
  o.detail = fmt("additivity exact: %s, K10/K4 ratio %.4f vs %.3f (tol %.0f%%), addition %lld < "
                 "original %lld",
                 additive ? "yes" : "NO", ratio, kFlopsRatioRef, kFlopsRatioTol * 100,
                 static_cast<long long>(fl_add), static_cast<long long>(fl_orig));
  return o;
}

// ---- criterion 9: determinism and formats ----

bool same_file_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa.good() || !fb.good()) return false;
  std::vector<char> ba{std::istreambuf_iterator<char>(fa), std::istreambuf_iterator<char>()};
  std::vector<char> bb{std::istreambuf_iterator<char>(fb), std::istreambuf_iterator<char>()};
  return ba == bb;
}

bool dirs_byte_identical(const fs::path& a, const fs::path& b) {
  std::size_t na = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++na;
    if (!same_file_bytes(e.path(), b / fs::relative(e.path(), a))) return false;
  }
  std::size_t nb = 0;
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++nb;
  return na == nb;
}

Outcome criterion_determinism() {
  TempDir td("determinism");
  cfg::RunConfig rc = cfg::profile_config("smoke");
  std::ostringstream log;

  cli::run_generate(rc, td.sub("a"), log);
  cli::run_generate(rc, td.sub("b"), log);
  const bool data_identical = dirs_byte_identical(td.path / "a", td.path / "b");

  cli::run_train(rc, td.sub("a"), td.sub("ta"), log);
  cli::run_train(rc, td.sub("a"), td.sub("tb"), log);
  bool metrics_identical = true;
  {
    std::ifstream fa(td.sub("ta/metrics.jsonl")), fb(td.sub("tb/metrics.jsonl"));
    std::string la, lb;
    while (std::getline(fa, la) && std::getline(fb, lb)) {
      cfg::json ja = cfg::json::parse(la), jb = cfg::json::parse(lb);
      for (const char* key : {"train_loss", "val_psnr", "val_ssim", "mse", "ssim_term", "sym"})
        metrics_identical =
            metrics_identical && ja.at(key).get<double>() == jb.at(key).get<double>();
    }
  }
  const bool params_identical = same_file_bytes(td.sub("ta/checkpoints/last/params.bin"),
                                                td.sub("tb/checkpoints/last/params.bin"));

  simdata::Dataset ds = simdata::read_dataset(td.sub("a/test"));
  simdata::write_dataset(td.sub("copy"), ds);
  const bool roundtrip = dirs_byte_identical(td.path / "a" / "test", td.path / "copy");

  Outcome o;
  o.pass = data_identical && metrics_identical && params_identical && roundtrip;
  o.detail = fmt("datasets byte-identical: %s, metrics fp-identical: %s, parameters "
                 "byte-identical: %s, manifest/binary round-trip: %s",
                 data_identical ? "yes" : "NO", metrics_identical ? "yes" : "NO",
                 params_identical ? "yes" : "NO", roundtrip ? "yes" : "NO");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Criterion criteria[] = {
      {1, "operator correctness", criterion_operators},
      {2, "structured low-rank math", criterion_lowrank},
      {3, "gate/fusion algebra", criterion_gates},
      {4, "cascade wiring identities", criterion_wiring},
      {5, "differentiability", criterion_gradients},
      {6, "loss schedule", criterion_loss},
      {7, "desk-scale learning", criterion_learning},
      {8, "cost accounting", criterion_flops},
      {9, "determinism and formats", criterion_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %d %s  %-28s %s  (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d/9 criteria passed\n", 9 - failures);
  return failures;
}

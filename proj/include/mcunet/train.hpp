#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mcunet/checkpoint.hpp"
#include "mcunet/metrics.hpp"
#include "mcunet/model.hpp"
#include "mcunet/simdata.hpp"

// Composite training objective and the optimizer loop. All randomness (init,
// per-epoch shuffles) derives from TrainConfig::seed, so a run is a pure
// function of (configs, dataset) and an interrupted run resumed from its
// checkpoint continues the exact uninterrupted trajectory.

namespace mcu::train {

// element k (1-based) = 10^((k-K)/(K-1)); K=1 degenerates to {1}
std::vector<double> gamma1_schedule(int k);

struct LossWeights {
  std::vector<double> gamma1;
  double gamma2 = 0.01;
  bool include_ssim = true;
};
LossWeights make_weights(int k, bool include_ssim = true);

// Differentiable mean-SSIM between the magnitudes of a reconstruction and a
// fixed reference, Gaussian-weighted local statistics over fully interior
// windows (border windows are masked out of the mean).
ad::Var ssim_graph(const ad::Var& x, const Tensor& ref, double data_range,
                   const metrics::SsimParams& p = {});

// mean(1 - ssim_map), built as (den-num)/den per window so a perfect
// reconstruction yields exactly zero.
ad::Var ssim_deficit_graph(const ad::Var& x, const Tensor& ref, double data_range,
                           const metrics::SsimParams& p = {});

// sum_k gamma1[k]*(MSE_k + (1 - SSIM_k)) + gamma2 * sym_k. The MSE is a mean
// over the 2*h*w real components; the symmetry penalty arrives as a raw sum
// of squares from the sparse branch.
struct LossBreakdown {
  ad::Var total;
  std::vector<double> mse, ssim_term, sym;  // raw per-cascade values for logs
};
LossBreakdown composite_loss(const std::vector<ad::Var>& xs, const std::vector<ad::Var>& syms,
                             const Tensor& xgt, const LossWeights& w);

struct TrainConfig {
  int epochs = 4;
  double lr = 1e-3;
  int batch = 1;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;  // epochs between "last" checkpoint writes
  bool include_ssim = true;
};

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t t = 0;
  std::vector<Tensor> m, v;  // parallel to ParamSet items

  void init(const nn::ParamSet& ps);
  // reads gradients off the bound graph nodes; parameters absent from the
  // graph count as zero gradient
  void step(nn::ParamSet& ps, const nn::Binding& b, double lr);
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;  // optimizer steps completed so far
  double train_loss = 0.0;
  double mse = 0.0, ssim_term = 0.0, sym = 0.0;  // epoch means of the raw terms
  double val_psnr = 0.0, val_ssim = 0.0;
  double wall_s = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_loss;  // one entry per optimizer step
  int best_epoch = -1;
  double best_val_psnr = -std::numeric_limits<double>::infinity();
  nn::ParamSet best_params;
};

class Trainer {
public:
  Trainer(const ModelConfig& mc, const TrainConfig& tc);

  // continue from a saved state; the checkpoint config must match
  void restore(const ckpt::Checkpoint& c);

  // Runs the remaining epochs. log_path appends one JSON-lines record per
  // epoch; ckpt_dir receives best/ and last/ checkpoint directories. A
  // non-finite loss aborts with the offending term and cascade.
  TrainResult run(const simdata::Dataset& tr, const simdata::Dataset& val,
                  const std::string& log_path = "", const std::string& ckpt_dir = "");

  nn::ParamSet& params() { return params_; }
  const ModelConfig& model_config() const { return mc_; }
  ckpt::Checkpoint snapshot(int completed_epoch, const TrainResult& r) const;

private:
  ModelConfig mc_;
  TrainConfig tc_;
  nn::ParamSet params_;
  Adam opt_;
  int start_epoch_ = 0;
  int geo_coils_ = 0, geo_h_ = 0, geo_w_ = 0;  // recorded into checkpoints by run()
};

// ---- evaluation helpers ----

Tensor reconstruct(const ModelConfig& mc, const nn::ParamSet& ps, const simdata::Slice& sl);

struct SliceMetrics {
  double psnr = 0.0;
  double ssim = 0.0;  // NaN when the image is smaller than the SSIM window
};
SliceMetrics eval_slice(const ModelConfig& mc, const nn::ParamSet& ps, const simdata::Slice& sl);
SliceMetrics zero_filled_metrics(const simdata::Slice& sl);

}  // namespace mcu::train

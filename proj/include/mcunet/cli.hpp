#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mcunet/config.hpp"

// Command implementations behind the binary, exposed as a library so they can
// be driven in-process. Each writes its outputs (plus the resolved config)
// under out_dir and reports progress on `out`. Validation problems raise
// std::invalid_argument, everything else std::runtime_error; the binary maps
// those to exit codes 1 and 2.

namespace mcu::cli {

// dataset splits written as <out_dir>/{train,val,test}; empty splits skipped
void run_generate(const cfg::RunConfig& rc, const std::string& out_dir, std::ostream& out);

// reads <data_dir>/train (+ optional val); writes metrics.jsonl and
// checkpoints/{best,last} under out_dir
void run_train(const cfg::RunConfig& rc, const std::string& data_dir, const std::string& out_dir,
               std::ostream& out);

void run_eval(const cfg::RunConfig& rc, const std::string& ckpt_dir, const std::string& data_dir,
              const std::string& split, const std::string& out_dir, std::ostream& out);

// recon.bin: per slice h*w interleaved complex float32 records
void run_reconstruct(const cfg::RunConfig& rc, const std::string& ckpt_dir,
                     const std::string& data_dir, const std::string& split,
                     const std::string& out_dir, std::ostream& out);

// trains every listed variant under the shared seed and budget
void run_ablate(const cfg::RunConfig& rc, const std::vector<std::string>& variants,
                const std::string& data_dir, const std::string& out_dir, std::ostream& out);

void run_flops(const cfg::RunConfig& rc, const std::string& out_dir, std::ostream& out);

void run_plot(const cfg::RunConfig& rc, const std::string& records_path,
              const std::string& ckpt_dir, const std::string& data_dir, const std::string& split,
              int slices, const std::string& out_dir, std::ostream& out);

// ---- pieces exposed for direct testing ----

struct Gray {
  int h = 0, w = 0;
  std::vector<std::uint8_t> px;  // row-major
};

// four panels left to right: ground truth, zero-filled, reconstruction,
// error map; all scaled by the ground-truth peak magnitude
Gray render_grid(const Tensor& gt, const Tensor& zf, const Tensor& recon);
Gray render_curve(const std::vector<double>& ys, int w = 480, int h = 320);
void write_pgm(const std::string& path, const Gray& g);
Gray read_pgm(const std::string& path);

// one eval output line; non-finite metrics serialize as null
cfg::json eval_record(int index, double psnr, double ssim, double zf_psnr, double zf_ssim);

}  // namespace mcu::cli

#include "mcunet/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mcunet/checkpoint.hpp"
#include "mcunet/metrics.hpp"
#include "mcunet/mri_ops.hpp"
#include "mcunet/train.hpp"

namespace mcu::cli {

namespace fs = std::filesystem;
using cfg::json;

namespace {

struct MeanStd {
  double mean = 0.0, stdev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(xs.size()))};
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

simdata::Dataset read_split(const std::string& data_dir, const std::string& split) {
  return simdata::read_dataset(data_dir + "/" + split);
}

void check_geometry(const ckpt::Checkpoint& ck, const simdata::Dataset& ds) {
  if (!ck.extra.contains("data")) return;  // hand-built checkpoint, nothing recorded
  const json& g = ck.extra.at("data");
  if (g.value("coils", 0) != ds.coils || g.value("height", 0) != ds.h ||
      g.value("width", 0) != ds.w) {
    std::ostringstream msg;
    msg << "checkpoint trained on " << g.value("coils", 0) << " coils " << g.value("height", 0)
        << "x" << g.value("width", 0) << " but dataset is " << ds.coils << " coils " << ds.h << "x"
        << ds.w;
    throw std::invalid_argument(msg.str());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  require(f.good(), "cannot write " + path);
  return f;
}

double mean_realized_accel(const simdata::Dataset& ds) {
  double sum = 0.0;
  for (const auto& sl : ds.slices) sum += simdata::realized_acceleration(sl.mask);
  return sum / static_cast<double>(ds.slices.size());
}

struct SplitEval {
  std::vector<double> psnr, ssim, zf_psnr, zf_ssim;
};

SplitEval eval_all(const ModelConfig& mc, const nn::ParamSet& ps, const simdata::Dataset& ds,
                   std::ofstream* records) {
  SplitEval ev;
  for (std::size_t i = 0; i < ds.slices.size(); ++i) {
    train::SliceMetrics r = train::eval_slice(mc, ps, ds.slices[i]);
    train::SliceMetrics z = train::zero_filled_metrics(ds.slices[i]);
    ev.psnr.push_back(r.psnr);
    ev.ssim.push_back(r.ssim);
    ev.zf_psnr.push_back(z.psnr);
    ev.zf_ssim.push_back(z.ssim);
    if (records)
      *records << eval_record(static_cast<int>(i), r.psnr, r.ssim, z.psnr, z.ssim).dump() << "\n";
  }
  return ev;
}

void print_metric_row(std::ostream& out, const std::string& label, const MeanStd& p,
                      const MeanStd& s) {
  out << "  " << std::left << std::setw(16) << label << std::right << std::fixed
      << std::setprecision(2) << std::setw(7) << p.mean << " +- " << std::setw(5) << p.stdev
      << "    " << std::setprecision(4) << std::setw(6) << s.mean << " +- " << std::setw(6)
      << s.stdev << "\n";
}

// least-squares line fit quality for the K sweep
double r_squared(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n, my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (syy == 0.0) return 1.0;
  return (sxy * sxy) / (sxx * syy);
}

void write_interleaved_f32(std::ofstream& f, const Tensor& planar) {
  const int h = planar.dim(1), w = planar.dim(2);
  std::vector<float> buf(static_cast<std::size_t>(h) * w * 2);
  for (int i = 0; i < h * w; ++i) {
    buf[2 * i] = static_cast<float>(planar[i]);
    buf[2 * i + 1] = static_cast<float>(planar[h * w + i]);
  }
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

}  // namespace

void run_generate(const cfg::RunConfig& rc, const std::string& out_dir, std::ostream& out) {
  simdata::GenSpec gs = rc.data;
  gs.seed = cfg::data_seed(rc);
  const simdata::SplitCounts sc = simdata::split_counts(gs.count);

  fs::create_directories(out_dir);
  cfg::write_resolved(rc, out_dir);

  struct Part {
    const char* name;
    int count, offset;
  };
  const Part parts[] = {{"train", sc.train, 0},
                        {"val", sc.val, sc.train},
                        {"test", sc.test, sc.train + sc.val}};
  for (const Part& p : parts) {
    if (p.count == 0) {
      out << p.name << ": 0 slices (skipped)\n";
      continue;
    }
    simdata::GenSpec part = gs;
    part.count = p.count;
    simdata::Dataset ds = simdata::generate(part, p.offset);
    simdata::write_dataset(out_dir + "/" + p.name, ds);
    out << p.name << ": " << p.count << " slices, realized acceleration " << std::fixed
        << std::setprecision(3) << mean_realized_accel(ds) << "\n";
    out.unsetf(std::ios::floatfield);
  }
}

void run_train(const cfg::RunConfig& rc, const std::string& data_dir, const std::string& out_dir,
               std::ostream& out) {
  simdata::Dataset tr = read_split(data_dir, "train");
  simdata::Dataset val;
  if (fs::exists(data_dir + "/val")) {
    val = read_split(data_dir, "val");
  } else {
    val.coils = tr.coils, val.h = tr.h, val.w = tr.w;
  }

  fs::create_directories(out_dir);
  cfg::write_resolved(rc, out_dir);

  train::TrainConfig tc = rc.train;
  tc.seed = cfg::train_seed(rc);
  train::Trainer trainer(rc.model, tc);
  auto t0 = std::chrono::steady_clock::now();
  train::TrainResult res =
      trainer.run(tr, val, out_dir + "/metrics.jsonl", out_dir + "/checkpoints");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out << "trained " << variant_name(rc.model.variant) << " for " << res.epochs.size()
      << " epochs (" << res.step_loss.size() << " steps) in " << std::fixed << std::setprecision(1)
      << wall << " s\n";
  if (!res.epochs.empty()) {
    out << "final train loss " << std::setprecision(6) << res.epochs.back().train_loss << "\n";
    if (res.best_epoch >= 0)
      out << "best val PSNR " << std::setprecision(2) << res.best_val_psnr << " dB at epoch "
          << res.best_epoch << "\n";
  }
  out.unsetf(std::ios::floatfield);
  out << "checkpoints under " << out_dir << "/checkpoints\n";
}

void run_eval(const cfg::RunConfig& rc, const std::string& ckpt_dir, const std::string& data_dir,
              const std::string& split, const std::string& out_dir, std::ostream& out) {
  ckpt::Checkpoint ck = ckpt::load_checkpoint(ckpt_dir);
  simdata::Dataset ds = read_split(data_dir, split);
  check_geometry(ck, ds);

  fs::create_directories(out_dir);
  cfg::write_resolved(rc, out_dir);
  std::ofstream records = open_out(out_dir + "/records.jsonl");
  SplitEval ev = eval_all(ck.config, ck.params, ds, &records);

  const MeanStd p = mean_std(ev.psnr), s = mean_std(ev.ssim);
  const MeanStd zp = mean_std(ev.zf_psnr), zs = mean_std(ev.zf_ssim);
  json summary{{"split", split},
               {"count", ds.slices.size()},
               {"psnr", {{"mean", finite_or_null(p.mean)}, {"std", finite_or_null(p.stdev)}}},
               {"ssim", {{"mean", finite_or_null(s.mean)}, {"std", finite_or_null(s.stdev)}}},
               {"zero_filled",
                {{"psnr", {{"mean", finite_or_null(zp.mean)}, {"std", finite_or_null(zp.stdev)}}},
                 {"ssim", {{"mean", finite_or_null(zs.mean)}, {"std", finite_or_null(zs.stdev)}}}}}};
  open_out(out_dir + "/summary.json") << summary.dump(2) << "\n";

  out << split << " split: " << ds.slices.size() << " slices\n";
  out << "                     PSNR (dB)        SSIM\n";
  print_metric_row(out, "reconstruction", p, s);
  print_metric_row(out, "zero-filled", zp, zs);
}

void run_reconstruct(const cfg::RunConfig& rc, const std::string& ckpt_dir,
                     const std::string& data_dir, const std::string& split,
                     const std::string& out_dir, std::ostream& out) {
  ckpt::Checkpoint ck = ckpt::load_checkpoint(ckpt_dir);
  simdata::Dataset ds = read_split(data_dir, split);
  check_geometry(ck, ds);

  fs::create_directories(out_dir);
  cfg::write_resolved(rc, out_dir);
  std::ofstream bin = open_out(out_dir + "/recon.bin");
  std::ofstream records = open_out(out_dir + "/records.jsonl");

  std::vector<double> psnrs;
  for (std::size_t i = 0; i < ds.slices.size(); ++i) {
    Tensor x = train::reconstruct(ck.config, ck.params, ds.slices[i]);
    write_interleaved_f32(bin, x);
    train::SliceMetrics r = train::eval_slice(ck.config, ck.params, ds.slices[i]);
    train::SliceMetrics z = train::zero_filled_metrics(ds.slices[i]);
    records << eval_record(static_cast<int>(i), r.psnr, r.ssim, z.psnr, z.ssim).dump() << "\n";
    psnrs.push_back(r.psnr);
  }
  out << "wrote " << ds.slices.size() << " reconstructions (" << ds.h << "x" << ds.w
      << " interleaved complex float32) to " << out_dir << "/recon.bin\n";
  out << "mean PSNR " << std::fixed << std::setprecision(2) << mean_std(psnrs).mean << " dB\n";
  out.unsetf(std::ios::floatfield);
}

void run_ablate(const cfg::RunConfig& rc, const std::vector<std::string>& variants,
                const std::string& data_dir, const std::string& out_dir, std::ostream& out) {
  require(variants.size() >= 2, "ablate: need at least two variants");
  std::vector<Variant> vs;
  for (const std::string& name : variants) vs.push_back(parse_variant(name));

  simdata::Dataset tr = read_split(data_dir, "train");
  simdata::Dataset val;
  if (fs::exists(data_dir + "/val")) {
    val = read_split(data_dir, "val");
  } else {
    val.coils = tr.coils, val.h = tr.h, val.w = tr.w;
  }
  simdata::Dataset test = read_split(data_dir, "test");

  fs::create_directories(out_dir);
  cfg::write_resolved(rc, out_dir);

  json rows = json::array();
  out << "variant          PSNR (dB)   SSIM      GFLOPs      params\n";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    ModelConfig mc = rc.model;
    mc.variant = vs[i];
    train::TrainConfig tc = rc.train;
    tc.seed = cfg::train_seed(rc);
    train::Trainer trainer(mc, tc);
    train::TrainResult res = trainer.run(tr, val);
    const nn::ParamSet& ps = res.best_epoch >= 0 ? res.best_params : trainer.params();

    SplitEval ev = eval_all(mc, ps, test, nullptr);
    const MeanStd p = mean_std(ev.psnr), s = mean_std(ev.ssim);
    const double gflops = to_gflops(count_flops(mc, test.h, test.w, test.coils).total(mc.k));
    const std::int64_t params = param_count(mc);

    char line[160];
    std::snprintf(line, sizeof(line), "%-15s %9.2f   %.4f   %9.4f   %9lld\n",
                  variants[i].c_str(), p.mean, s.mean, gflops,
                  static_cast<long long>(params));
    out << line;
    rows.push_back(json{{"variant", variants[i]},
                        {"psnr", finite_or_null(p.mean)},
                        {"ssim", finite_or_null(s.mean)},
                        {"gflops", gflops},
                        {"params", params}});
  }
  open_out(out_dir + "/ablate.json") << rows.dump(2) << "\n";
}

void run_flops(const cfg::RunConfig& rc, const std::string& out_dir, std::ostream& out) {
  const int h = rc.data.h, w = rc.data.w, c = rc.data.coils;
  const FlopsReport fr = count_flops(rc.model, h, w, c);

  out << "geometry " << h << "x" << w << ", " << c << " coils\n";
  auto row = [&](const char* name, std::int64_t ops) {
    char line[96];
    std::snprintf(line, sizeof(line), "  %-12s %12.6f GFLOPs\n", name, to_gflops(ops));
    out << line;
  };
  row("sparse", fr.sparse);
  row("lowrank", fr.lowrank);
  row("gsam", fr.gsam);
  row("fuse", fr.fuse);
  row("correction", fr.correction);
  row("dc", fr.dc);
  row("per-COCA", fr.per_coca);
  row("init", fr.init);
  row("total", fr.total(rc.model.k));
  out << "  (total at K=" << rc.model.k << ")\n";

  std::vector<double> ks, totals;
  json sweep = json::array();
  for (int k : {2, 4, 6, 8, 10}) {
    ks.push_back(k);
    totals.push_back(to_gflops(fr.total(k)));
    sweep.push_back(json{{"k", k}, {"gflops", totals.back()}});
  }
  const double r2 = r_squared(ks, totals);
  const double ratio = static_cast<double>(fr.total(10)) / static_cast<double>(fr.total(4));
  out << "K sweep 2..10: line fit R^2 = " << std::fixed << std::setprecision(6) << r2
      << ", total(10)/total(4) = " << std::setprecision(4) << ratio << "\n";
  out.unsetf(std::ios::floatfield);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    cfg::write_resolved(rc, out_dir);
    json doc{{"geometry", {{"height", h}, {"width", w}, {"coils", c}}},
             {"per_coca",
              {{"sparse", fr.sparse},
               {"lowrank", fr.lowrank},
               {"gsam", fr.gsam},
               {"fuse", fr.fuse},
               {"correction", fr.correction},
               {"dc", fr.dc},
               {"total", fr.per_coca}}},
             {"init", fr.init},
             {"k", rc.model.k},
             {"total", fr.total(rc.model.k)},
             {"sweep", sweep},
             {"sweep_r2", r2},
             {"ratio_k10_k4", ratio}};
    open_out(out_dir + "/flops.json") << doc.dump(2) << "\n";
  }
}

void run_plot(const cfg::RunConfig& rc, const std::string& records_path,
              const std::string& ckpt_dir, const std::string& data_dir, const std::string& split,
              int slices, const std::string& out_dir, std::ostream& out) {
  require(slices >= 1, "plot: slices must be >= 1");
  std::ifstream rec(records_path);
  require(rec.good(), "plot: cannot open " + records_path);
  std::vector<double> epochs, val_psnr, train_loss;
  std::string line;
  while (std::getline(rec, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::invalid_argument("plot: bad record in " + records_path + ": " + e.what());
    }
    epochs.push_back(j.value("epoch", 0.0));
    val_psnr.push_back(j.value("val_psnr", 0.0));
    train_loss.push_back(j.value("train_loss", 0.0));
  }
  require(!epochs.empty(), "plot: no records in " + records_path);

  fs::create_directories(out_dir);
  cfg::write_resolved(rc, out_dir);
  write_pgm(out_dir + "/curve_val_psnr.pgm", render_curve(val_psnr));
  write_pgm(out_dir + "/curve_train_loss.pgm", render_curve(train_loss));
  json curves{{"epochs", epochs}, {"val_psnr", val_psnr}, {"train_loss", train_loss}};
  open_out(out_dir + "/curves.json") << curves.dump(2) << "\n";
  out << "curves over " << epochs.size() << " epochs -> " << out_dir << "\n";

  ckpt::Checkpoint ck = ckpt::load_checkpoint(ckpt_dir);
  simdata::Dataset ds = read_split(data_dir, split);
  check_geometry(ck, ds);
  const int n = std::min<int>(slices, static_cast<int>(ds.slices.size()));
  for (int i = 0; i < n; ++i) {
    const simdata::Slice& sl = ds.slices[static_cast<std::size_t>(i)];
    Tensor zf = adjoint_model(sl.y, sl.csm, sl.mask);
    Tensor recon = train::reconstruct(ck.config, ck.params, sl);
    char name[48];
    std::snprintf(name, sizeof(name), "/slice_%03d.pgm", i);
    write_pgm(out_dir + name, render_grid(sl.xgt, zf, recon));
  }
  out << "wrote " << n << " reconstruction grids (GT | zero-filled | recon | error)\n";
}

// ---- image helpers ----

namespace {

constexpr int kSep = 2;  // white gutter between panels

void blit_panel(Gray& g, int x0, const Tensor& mag, double scale) {
  for (int r = 0; r < mag.dim(0); ++r)
    for (int c = 0; c < mag.dim(1); ++c) {
      double v = mag[r * mag.dim(1) + c] / scale;
      v = std::clamp(v, 0.0, 1.0);
      g.px[static_cast<std::size_t>(r) * g.w + x0 + c] =
          static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
}

}  // namespace

Gray render_grid(const Tensor& gt, const Tensor& zf, const Tensor& recon) {
  Tensor gm = metrics::magnitude_image(gt);
  Tensor zm = metrics::magnitude_image(zf);
  Tensor rm = metrics::magnitude_image(recon);
  const int h = gm.dim(0), w = gm.dim(1);
  require(zm.dim(0) == h && zm.dim(1) == w && rm.dim(0) == h && rm.dim(1) == w,
          "render_grid: panel shapes differ");
  Tensor err({h, w});
  for (int i = 0; i < h * w; ++i) err[i] = std::abs(rm[i] - gm[i]);

  double scale = 0.0;
  for (int i = 0; i < h * w; ++i) scale = std::max(scale, gm[i]);
  if (scale == 0.0) scale = 1.0;

  Gray g;
  g.h = h;
  g.w = 4 * w + 3 * kSep;
  g.px.assign(static_cast<std::size_t>(g.h) * g.w, 255);
  blit_panel(g, 0, gm, scale);
  blit_panel(g, w + kSep, zm, scale);
  blit_panel(g, 2 * (w + kSep), rm, scale);
  blit_panel(g, 3 * (w + kSep), err, scale);
  return g;
}

Gray render_curve(const std::vector<double>& ys, int w, int h) {
  require(!ys.empty(), "render_curve: empty series");
  require(w >= 16 && h >= 16, "render_curve: canvas too small");
  Gray g;
  g.h = h, g.w = w;
  g.px.assign(static_cast<std::size_t>(h) * w, 255);
  const int m = 8;  // margin
  for (int x = m; x < w - m; ++x) g.px[static_cast<std::size_t>(h - m) * w + x] = 0;
  for (int y = m; y < h - m; ++y) g.px[static_cast<std::size_t>(y) * w + m] = 0;

  double lo = ys[0], hi = ys[0];
  for (double y : ys) lo = std::min(lo, y), hi = std::max(hi, y);
  if (hi == lo) hi = lo + 1.0;
  auto px = [&](std::size_t i) {
    double fx = ys.size() == 1 ? 0.0 : static_cast<double>(i) / (ys.size() - 1.0);
    double fy = (ys[i] - lo) / (hi - lo);
    int x = m + static_cast<int>(std::lround(fx * (w - 2 * m - 1)));
    int y = (h - m - 1) - static_cast<int>(std::lround(fy * (h - 2 * m - 1)));
    return std::pair<int, int>(x, y);
  };
  auto plot = [&](int x, int y) {
    if (x >= 0 && x < w && y >= 0 && y < h) g.px[static_cast<std::size_t>(y) * w + x] = 0;
  };
  for (std::size_t i = 0; i + 1 < ys.size() || (ys.size() == 1 && i == 0); ++i) {
    auto [x0, y0] = px(i);
    if (ys.size() == 1) {
      plot(x0, y0);
      break;
    }
    auto [x1, y1] = px(i + 1);
    const int steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
    for (int s = 0; s <= steps; ++s) {
      double t = static_cast<double>(s) / steps;
      plot(static_cast<int>(std::lround(x0 + t * (x1 - x0))),
           static_cast<int>(std::lround(y0 + t * (y1 - y0))));
    }
  }
  return g;
}

void write_pgm(const std::string& path, const Gray& g) {
  require(g.h >= 1 && g.w >= 1 &&
              g.px.size() == static_cast<std::size_t>(g.h) * static_cast<std::size_t>(g.w),
          "write_pgm: inconsistent image");
  std::ofstream f = open_out(path);
  f << "P5\n" << g.w << " " << g.h << "\n255\n";
  f.write(reinterpret_cast<const char*>(g.px.data()), static_cast<std::streamsize>(g.px.size()));
  require(f.good(), "write_pgm: short write to " + path);
}

Gray read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "read_pgm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  require(magic == "P5" && maxval == 255 && w >= 1 && h >= 1, "read_pgm: unsupported header");
  f.get();  // single whitespace byte after the header
  Gray g;
  g.h = h, g.w = w;
  g.px.resize(static_cast<std::size_t>(h) * w);
  f.read(reinterpret_cast<char*>(g.px.data()), static_cast<std::streamsize>(g.px.size()));
  require(f.gcount() == static_cast<std::streamsize>(g.px.size()), "read_pgm: truncated " + path);
  return g;
}

cfg::json eval_record(int index, double psnr, double ssim, double zf_psnr, double zf_ssim) {
  return json{{"index", index},
              {"psnr", finite_or_null(psnr)},
              {"ssim", finite_or_null(ssim)},
              {"zf_psnr", finite_or_null(zf_psnr)},
              {"zf_ssim", finite_or_null(zf_ssim)}};
}

}  // namespace mcu::cli

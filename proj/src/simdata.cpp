#include "mcunet/simdata.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <exception>
#include <numeric>

#include "mcunet/mri_ops.hpp"
#include "mcunet/rng.hpp"

namespace mcu::simdata {

static_assert(std::endian::native == std::endian::little,
              "dataset binaries are specified little-endian");

using nlohmann::json;

PhantomSpec random_phantom_spec(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  PhantomSpec spec;
  spec.h = h;
  spec.w = w;

  Ellipse bg;
  bg.ry = 0.78 + 0.1 * rng.uniform();
  bg.rx = 0.72 + 0.1 * rng.uniform();
  bg.angle = rng.uniform(0.0, M_PI);
  double mag = 0.6 + 0.2 * rng.uniform();
  double ph = rng.uniform(-0.3, 0.3);
  bg.re = mag * std::cos(ph);
  bg.im = mag * std::sin(ph);
  spec.ellipses.push_back(bg);

  int n = rng.uniform_int(3, 6);
  for (int i = 0; i < n; ++i) {
    Ellipse e;
    e.ry = rng.uniform(0.06, 0.3);
    e.rx = rng.uniform(0.06, 0.3);
    double rmax = std::max(e.ry, e.rx);
    double room = 0.9 - rmax;
    e.cy = rng.uniform(-room, room);
    e.cx = rng.uniform(-room, room);
    e.angle = rng.uniform(0.0, M_PI);
    mag = rng.uniform(0.25, 1.0);
    ph = rng.uniform(-M_PI, M_PI);
    e.re = mag * std::cos(ph);
    e.im = mag * std::sin(ph);
    spec.ellipses.push_back(e);
  }
  return spec;
}

Tensor make_phantom(const PhantomSpec& spec) {
  require(spec.h >= 1 && spec.w >= 1, "make_phantom: empty grid");
  require(!spec.ellipses.empty(), "make_phantom: empty ellipse list");
  for (const Ellipse& e : spec.ellipses) {
    require(e.rx > 0.0 && e.ry > 0.0, "make_phantom: nonpositive ellipse axis");
    double rmax = std::max(e.rx, e.ry);
    require(std::abs(e.cx) + rmax <= 1.0 + 1e-9 && std::abs(e.cy) + rmax <= 1.0 + 1e-9,
            "make_phantom: ellipse leaves the [-1,1]^2 frame");
  }

  const int h = spec.h, w = spec.w;
  Tensor x({2, h, w});
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i) {
    double v = (2.0 * i + 1.0) / h - 1.0;
    for (int j = 0; j < w; ++j) {
      double u = (2.0 * j + 1.0) / w - 1.0;
      double re = 0.0, im = 0.0;
      for (const Ellipse& e : spec.ellipses) {
        double dy = v - e.cy, dx = u - e.cx;
        double c = std::cos(e.angle), s = std::sin(e.angle);
        double ax = (c * dx + s * dy) / e.rx;
        double ay = (-s * dx + c * dy) / e.ry;
        if (ax * ax + ay * ay <= 1.0) {
          re += e.re;
          im += e.im;
        }
      }
      x.at(0, i, j) = re;
      x.at(1, i, j) = im;
    }
  }

  double peak = 0.0;
  for (int i = 0; i < h * w; ++i)
    peak = std::max(peak, std::hypot(x[i], x[h * w + i]));
  require(peak > 0.0, "make_phantom: phantom is identically zero");
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] /= peak;
  return x;
}

Tensor make_csm(int coils, int h, int w, std::uint64_t seed) {
  require(coils >= 1, "make_csm: coils must be >= 1");
  require(h >= 1 && w >= 1, "make_csm: empty grid");
  Rng rng(seed);

  // magnitude = b0 + b1 u + b2 v + b3 uv + b4 u^2 + b5 v^2 stays >= 0.15 for
  // |u|,|v| <= 1, so the pixelwise normalizer never divides by zero
  std::vector<std::array<double, 6>> b(static_cast<std::size_t>(coils));
  std::vector<std::array<double, 3>> p(static_cast<std::size_t>(coils));
  for (int c = 0; c < coils; ++c) {
    b[c][0] = 0.9 + 0.2 * rng.uniform();
    for (int t = 1; t < 6; ++t) b[c][t] = rng.uniform(-0.15, 0.15);
    p[c][0] = rng.uniform(-M_PI, M_PI);
    p[c][1] = rng.uniform(-0.8, 0.8);
    p[c][2] = rng.uniform(-0.8, 0.8);
  }

  Tensor s({coils, 2, h, w});
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i) {
    double v = (2.0 * i + 1.0) / h - 1.0;
    for (int j = 0; j < w; ++j) {
      double u = (2.0 * j + 1.0) / w - 1.0;
      double sum2 = 0.0;
      for (int c = 0; c < coils; ++c) {
        double m = b[c][0] + b[c][1] * u + b[c][2] * v + b[c][3] * u * v + b[c][4] * u * u +
                   b[c][5] * v * v;
        double ph = p[c][0] + p[c][1] * u + p[c][2] * v;
        s.at(c, 0, i, j) = m * std::cos(ph);
        s.at(c, 1, i, j) = m * std::sin(ph);
        sum2 += m * m;
      }
      double r = std::sqrt(sum2);
      for (int c = 0; c < coils; ++c) {
        s.at(c, 0, i, j) /= r;
        s.at(c, 1, i, j) /= r;
      }
    }
  }
  return s;
}

MaskKind parse_mask_kind(const std::string& name) {
  if (name == "cartesian_random") return MaskKind::cartesian_random;
  if (name == "cartesian_equispaced") return MaskKind::cartesian_equispaced;
  if (name == "random_2d") return MaskKind::random_2d;
  throw std::invalid_argument("unknown mask kind '" + name +
                              "' (cartesian_random, cartesian_equispaced, random_2d)");
}

std::string mask_kind_name(MaskKind k) {
  switch (k) {
    case MaskKind::cartesian_random: return "cartesian_random";
    case MaskKind::cartesian_equispaced: return "cartesian_equispaced";
    case MaskKind::random_2d: return "random_2d";
  }
  throw std::logic_error("mask_kind_name: bad enum");
}

int default_center_lines(int w) {
  return 2 * static_cast<int>(std::llround(w * (24.0 / 368.0) / 2.0));
}

namespace {

// indices outside [start, start+len) in ascending order
std::vector<int> outer_indices(int n, int start, int len) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n - len));
  for (int i = 0; i < n; ++i)
    if (i < start || i >= start + len) out.push_back(i);
  return out;
}

}  // namespace

Tensor make_mask(const MaskSpec& spec, int h, int w) {
  require(h >= 1 && w >= 1, "make_mask: empty grid");
  require(spec.accel >= 1.0, "make_mask: acceleration must be >= 1");
  int center = spec.center_lines < 0 ? default_center_lines(w) : spec.center_lines;
  require(center >= 0 && center <= w, "make_mask: center lines out of range");

  Tensor mask({h, w});
  if (spec.kind == MaskKind::random_2d) {
    std::int64_t budget = std::llround(static_cast<double>(h) * w / spec.accel);
    int cs_r = std::min(center, h), cs_c = center;
    std::int64_t center_pts = static_cast<std::int64_t>(cs_r) * cs_c;
    require(center_pts <= budget, "make_mask: center block alone exceeds the sampling budget");
    int r0 = (h - cs_r) / 2, c0 = (w - cs_c) / 2;
    for (int i = r0; i < r0 + cs_r; ++i)
      for (int j = c0; j < c0 + cs_c; ++j) mask.at(i, j) = 1.0;
    std::vector<std::int64_t> pts;
    pts.reserve(static_cast<std::size_t>(h) * w - center_pts);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        if (mask.at(i, j) == 0.0) pts.push_back(static_cast<std::int64_t>(i) * w + j);
    Rng rng(spec.seed);
    rng.shuffle(pts);
    for (std::int64_t t = 0; t < budget - center_pts; ++t) mask[pts[static_cast<std::size_t>(t)]] = 1.0;
    return mask;
  }

  // Cartesian: whole columns
  int budget = static_cast<int>(std::llround(w / spec.accel));
  require(budget >= 1, "make_mask: sampling budget is empty");
  require(center <= budget, "make_mask: center block alone exceeds the sampling budget");
  int c0 = (w - center) / 2;
  std::vector<int> cols;
  for (int j = c0; j < c0 + center; ++j) cols.push_back(j);

  int needed = budget - center;
  std::vector<int> outer = outer_indices(w, c0, center);
  if (spec.kind == MaskKind::cartesian_equispaced) {
    double stride = static_cast<double>(outer.size()) / std::max(needed, 1);
    for (int t = 0; t < needed; ++t)
      cols.push_back(outer[static_cast<std::size_t>(std::floor(t * stride))]);
  } else {
    Rng rng(spec.seed);
    rng.shuffle(outer);
    for (int t = 0; t < needed; ++t) cols.push_back(outer[static_cast<std::size_t>(t)]);
  }
  for (int j : cols)
    for (int i = 0; i < h; ++i) mask.at(i, j) = 1.0;
  return mask;
}

double realized_acceleration(const Tensor& mask) {
  double sampled = 0.0;
  for (std::int64_t i = 0; i < mask.numel(); ++i) sampled += mask[i];
  require(sampled > 0.0, "realized_acceleration: empty mask");
  return static_cast<double>(mask.numel()) / sampled;
}

Tensor simulate_acquisition(const Tensor& xgt, const Tensor& csm, const Tensor& mask,
                            double noise_sigma, std::uint64_t seed) {
  require(noise_sigma >= 0.0, "simulate_acquisition: negative noise sigma");
  Tensor y = forward_model(xgt, csm, mask);
  if (noise_sigma == 0.0) return y;

  const int coils = y.dim(0), h = y.dim(2), w = y.dim(3);
  Rng rng(seed);
  for (int c = 0; c < coils; ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        if (mask.at(i, j) != 0.0) {
          y.at(c, 0, i, j) += noise_sigma * rng.normal();
          y.at(c, 1, i, j) += noise_sigma * rng.normal();
        }
  return y;
}

Dataset generate(const GenSpec& spec, int index_offset) {
  require(spec.count >= 1, "generate: count must be >= 1");
  require(index_offset >= 0, "generate: negative index offset");

  Dataset ds;
  ds.coils = spec.coils;
  ds.h = spec.h;
  ds.w = spec.w;
  ds.slices.resize(static_cast<std::size_t>(spec.count));
  std::exception_ptr failure;  // exceptions must not escape the parallel region
#pragma omp parallel for schedule(static)
  for (int i = 0; i < spec.count; ++i) {
    try {
      std::uint64_t g = static_cast<std::uint64_t>(index_offset + i);
      Slice& sl = ds.slices[static_cast<std::size_t>(i)];
      sl.xgt =
          make_phantom(random_phantom_spec(spec.h, spec.w, derive_seed(spec.seed, "phantom", g)));
      sl.csm = make_csm(spec.coils, spec.h, spec.w, derive_seed(spec.seed, "csm", g));
      MaskSpec ms = spec.mask;
      ms.seed = derive_seed(spec.seed, "mask", g);
      sl.mask = make_mask(ms, spec.h, spec.w);
      sl.y = simulate_acquisition(sl.xgt, sl.csm, sl.mask, spec.noise_sigma,
                                  derive_seed(spec.seed, "noise", g));
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  int center = spec.mask.center_lines < 0 ? default_center_lines(spec.w) : spec.mask.center_lines;
  ds.meta = json{{"seed", spec.seed},
                 {"index_offset", index_offset},
                 {"noise_sigma", spec.noise_sigma},
                 {"mask",
                  {{"kind", mask_kind_name(spec.mask.kind)},
                   {"acceleration", spec.mask.accel},
                   {"center_lines", center}}}};
  return ds;
}

SplitCounts split_counts(int count) {
  require(count >= 1, "split_counts: count must be >= 1");
  SplitCounts s;
  s.val = count / 5;
  s.test = count / 5;
  s.train = count - s.val - s.test;
  return s;
}

namespace {

// interleaved-complex fp32 records; planar==true reads channel pairs from
// [..,2,h,w] blocks, otherwise the tensor is real and imag parts are zero
void append_complex(std::vector<float>& out, const Tensor& t, bool planar) {
  if (!planar) {
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      out.push_back(static_cast<float>(t[i]));
      out.push_back(0.0f);
    }
    return;
  }
  const int nd = t.ndim();
  require(nd >= 3 && t.dim(nd - 3) == 2, "append_complex: expected [..,2,h,w]");
  std::int64_t plane = static_cast<std::int64_t>(t.dim(nd - 2)) * t.dim(nd - 1);
  std::int64_t blocks = t.numel() / (2 * plane);
  const double* d = t.data();
  for (std::int64_t b = 0; b < blocks; ++b) {
    const double* re = d + b * 2 * plane;
    const double* im = re + plane;
    for (std::int64_t i = 0; i < plane; ++i) {
      out.push_back(static_cast<float>(re[i]));
      out.push_back(static_cast<float>(im[i]));
    }
  }
}

void take_complex(const std::vector<float>& in, std::size_t& pos, Tensor& t, bool planar) {
  if (!planar) {
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      t[i] = in[pos];
      pos += 2;  // imaginary part is zero by format
    }
    return;
  }
  const int nd = t.ndim();
  std::int64_t plane = static_cast<std::int64_t>(t.dim(nd - 2)) * t.dim(nd - 1);
  std::int64_t blocks = t.numel() / (2 * plane);
  double* d = t.data();
  for (std::int64_t b = 0; b < blocks; ++b) {
    double* re = d + b * 2 * plane;
    double* im = re + plane;
    for (std::int64_t i = 0; i < plane; ++i) {
      re[i] = in[pos++];
      im[i] = in[pos++];
    }
  }
}

void write_bin(const std::filesystem::path& path, const std::vector<float>& v) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "write_dataset: cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(float)));
  require(f.good(), "write_dataset: short write to " + path.string());
}

std::vector<float> read_bin(const std::filesystem::path& path, std::size_t expect_floats) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  require(f.good(), "read_dataset: cannot open " + path.string());
  auto bytes = static_cast<std::size_t>(f.tellg());
  require(bytes == expect_floats * sizeof(float),
          "read_dataset: " + path.string() + " has " + std::to_string(bytes) + " bytes, expected " +
              std::to_string(expect_floats * sizeof(float)));
  std::vector<float> v(expect_floats);
  f.seekg(0);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  require(f.good(), "read_dataset: short read from " + path.string());
  return v;
}

}  // namespace

void write_dataset(const std::string& dir, const Dataset& ds) {
  require(!ds.slices.empty(), "write_dataset: empty dataset");
  const int n = static_cast<int>(ds.slices.size());
  std::filesystem::create_directories(dir);

  std::vector<float> xgt, csm, mask, y;
  for (const Slice& sl : ds.slices) {
    require_shape(sl.xgt, {2, ds.h, ds.w}, "write_dataset: xgt");
    require_shape(sl.csm, {ds.coils, 2, ds.h, ds.w}, "write_dataset: csm");
    require_shape(sl.mask, {ds.h, ds.w}, "write_dataset: mask");
    require_shape(sl.y, {ds.coils, 2, ds.h, ds.w}, "write_dataset: y");
    append_complex(xgt, sl.xgt, true);
    append_complex(csm, sl.csm, true);
    append_complex(mask, sl.mask, false);
    append_complex(y, sl.y, true);
  }
  std::filesystem::path root(dir);
  write_bin(root / "xgt.bin", xgt);
  write_bin(root / "csm.bin", csm);
  write_bin(root / "mask.bin", mask);
  write_bin(root / "y.bin", y);

  json manifest{{"format", "mcunet-dataset"},
                {"version", 1},
                {"dtype", "complex64 little-endian interleaved (re,im) fp32"},
                {"slices", n},
                {"coils", ds.coils},
                {"height", ds.h},
                {"width", ds.w},
                {"arrays",
                 {{"xgt.bin", {n, ds.h, ds.w}},
                  {"csm.bin", {n, ds.coils, ds.h, ds.w}},
                  {"mask.bin", {n, ds.h, ds.w}},
                  {"y.bin", {n, ds.coils, ds.h, ds.w}}}},
                {"generation", ds.meta.is_null() ? json::object() : ds.meta}};
  std::ofstream f(root / "manifest.json");
  require(f.good(), "write_dataset: cannot open manifest.json");
  f << manifest.dump(2) << "\n";
  require(f.good(), "write_dataset: short write to manifest.json");
}

Dataset read_dataset(const std::string& dir) {
  std::filesystem::path root(dir);
  std::ifstream f(root / "manifest.json");
  require(f.good(), "read_dataset: cannot open " + (root / "manifest.json").string());
  json manifest;
  try {
    f >> manifest;
  } catch (const json::exception& e) {
    throw std::invalid_argument("read_dataset: bad manifest.json: " + std::string(e.what()));
  }
  require(manifest.value("format", "") == "mcunet-dataset", "read_dataset: unknown format tag");
  require(manifest.value("version", 0) == 1, "read_dataset: unsupported version");

  Dataset ds;
  const int n = manifest.at("slices").get<int>();
  ds.coils = manifest.at("coils").get<int>();
  ds.h = manifest.at("height").get<int>();
  ds.w = manifest.at("width").get<int>();
  require(n >= 1 && ds.coils >= 1 && ds.h >= 1 && ds.w >= 1, "read_dataset: bad geometry");
  ds.meta = manifest.value("generation", json::object());

  std::size_t plane = static_cast<std::size_t>(ds.h) * ds.w;
  auto xgt = read_bin(root / "xgt.bin", 2 * n * plane);
  auto csm = read_bin(root / "csm.bin", 2 * n * ds.coils * plane);
  auto mask = read_bin(root / "mask.bin", 2 * n * plane);
  auto y = read_bin(root / "y.bin", 2 * n * ds.coils * plane);

  ds.slices.resize(static_cast<std::size_t>(n));
  std::size_t px = 0, pc = 0, pm = 0, py = 0;
  for (Slice& sl : ds.slices) {
    sl.xgt = Tensor({2, ds.h, ds.w});
    sl.csm = Tensor({ds.coils, 2, ds.h, ds.w});
    sl.mask = Tensor({ds.h, ds.w});
    sl.y = Tensor({ds.coils, 2, ds.h, ds.w});
    take_complex(xgt, px, sl.xgt, true);
    take_complex(csm, pc, sl.csm, true);
    take_complex(mask, pm, sl.mask, false);
    take_complex(y, py, sl.y, true);
  }
  return ds;
}

}  // namespace mcu::simdata

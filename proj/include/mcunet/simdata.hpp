#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcunet/tensor.hpp"

// Synthetic multi-coil acquisition: piecewise-constant complex phantoms,
// smooth normalized sensitivity maps, undersampling masks, and the on-disk
// dataset format. Every generator is a pure function of (spec, seed).

namespace mcu::simdata {

// Geometry is normalized to [-1,1]^2 over pixel centers; an ellipse is valid
// when it fits inside that square for any rotation (|center| + max axis <= 1
// per coordinate).
struct Ellipse {
  double cy = 0.0, cx = 0.0;
  double ry = 0.0, rx = 0.0;
  double angle = 0.0;        // radians, counterclockwise
  double re = 0.0, im = 0.0; // complex intensity, summed where ellipses overlap
};

struct PhantomSpec {
  int h = 32, w = 32;
  std::vector<Ellipse> ellipses;
};

// One background ellipse plus a seeded handful of internal features with
// random complex contrasts.
PhantomSpec random_phantom_spec(int h, int w, std::uint64_t seed);

// Renders the ellipse sum on the pixel grid and scales the peak magnitude to
// one. Empty ellipse list or an out-of-bounds ellipse is a validation error.
Tensor make_phantom(const PhantomSpec& spec);

// Smooth complex maps: per coil a low-order magnitude polynomial (kept away
// from zero) times a linear-phase factor, then pixelwise normalized so
// sum_i |S_i|^2 = 1. The per-pixel-step gradient of each normalized |S_i|
// stays below 4/min(h,w).
Tensor make_csm(int coils, int h, int w, std::uint64_t seed);

enum class MaskKind { cartesian_random, cartesian_equispaced, random_2d };

MaskKind parse_mask_kind(const std::string& name);  // invalid -> validation error
std::string mask_kind_name(MaskKind k);

// Fully sampled center width: 24/368 of the image width rounded to the
// nearest even count.
int default_center_lines(int w);

struct MaskSpec {
  MaskKind kind = MaskKind::cartesian_random;
  double accel = 4.0;
  int center_lines = -1;  // -1 = default_center_lines(w)
  std::uint64_t seed = 0;
};

// Cartesian kinds sample whole columns against a budget of round(w/accel):
// the center block first, then equispaced outer columns from offset zero or a
// seeded draw without replacement. random_2d works pointwise against
// round(h*w/accel) with a fully sampled center square. A center block that
// alone exceeds the budget is a validation error.
Tensor make_mask(const MaskSpec& spec, int h, int w);

double realized_acceleration(const Tensor& mask);  // numel / sampled

// y = A x_g plus zero-mean Gaussian noise of std noise_sigma on each real
// component of the sampled positions; unsampled entries stay exactly zero.
Tensor simulate_acquisition(const Tensor& xgt, const Tensor& csm, const Tensor& mask,
                            double noise_sigma, std::uint64_t seed);

struct Slice {
  Tensor xgt;   // [2,h,w]
  Tensor csm;   // [coils,2,h,w]
  Tensor mask;  // [h,w]
  Tensor y;     // [coils,2,h,w]
};

struct Dataset {
  int coils = 0, h = 0, w = 0;
  std::vector<Slice> slices;
  nlohmann::json meta;  // generation record, round-trips through the manifest
};

struct GenSpec {
  int count = 12;
  int coils = 4;
  int h = 32, w = 32;
  MaskSpec mask;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;
};

// Slice g = index_offset + i draws its phantom/csm/mask/noise streams from
// derive_seed(seed, tag, g), so split directories built from disjoint offset
// ranges never share randomness and any slice can be regenerated alone.
Dataset generate(const GenSpec& spec, int index_offset = 0);

// train = count - 2*floor(count/5), val = test = floor(count/5).
struct SplitCounts {
  int train = 0, val = 0, test = 0;
};
SplitCounts split_counts(int count);

// Directory format: manifest.json plus one raw binary per array. Binaries are
// little-endian interleaved-complex fp32 ((re,im) per element; the mask
// stores zero imaginary parts), slices concatenated in order:
//   xgt.bin  [n,h,w]        csm.bin [n,coils,h,w]
//   mask.bin [n,h,w]        y.bin   [n,coils,h,w]
void write_dataset(const std::string& dir, const Dataset& ds);
Dataset read_dataset(const std::string& dir);

}  // namespace mcu::simdata

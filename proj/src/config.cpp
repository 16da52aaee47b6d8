#include "mcunet/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>

#include "mcunet/checkpoint.hpp"
#include "mcunet/rng.hpp"
#include "mcunet/tensor.hpp"

namespace mcu::cfg {

namespace {

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> keys) {
  require(j.is_object(), "config: " + path + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw std::invalid_argument("config: unknown key '" + path + it.key() + "'");
  }
}

template <typename T>
void pick(const json& j, const char* key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: bad value at '" + path + key + "': " + e.what());
  }
}

void apply_mask(simdata::MaskSpec& m, const json& j) {
  reject_unknown(j, "data.mask.", {"kind", "acceleration", "center_lines"});
  if (j.contains("kind")) {
    std::string s;
    pick(j, "kind", "data.mask.", s);
    m.kind = simdata::parse_mask_kind(s);
  }
  pick(j, "acceleration", "data.mask.", m.accel);
  pick(j, "center_lines", "data.mask.", m.center_lines);
}

void apply_data(simdata::GenSpec& d, const json& j) {
  reject_unknown(j, "data.", {"count", "coils", "height", "width", "noise_sigma", "mask"});
  pick(j, "count", "data.", d.count);
  pick(j, "coils", "data.", d.coils);
  pick(j, "height", "data.", d.h);
  pick(j, "width", "data.", d.w);
  pick(j, "noise_sigma", "data.", d.noise_sigma);
  if (j.contains("mask")) apply_mask(d.mask, j.at("mask"));
}

void apply_model(ModelConfig& m, const json& j) {
  // same key set as the checkpoint manifest; overlay onto the current value
  // so partial documents work, then reuse the strict checkpoint parser
  json merged = ckpt::config_to_json(m);
  reject_unknown(j, "model.",
                 {"k", "variant", "sparse_width", "lowrank_ch", "gsam_hidden", "correction_ch"});
  for (auto it = j.begin(); it != j.end(); ++it) merged[it.key()] = it.value();
  try {
    m = ckpt::config_from_json(merged);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: bad model section: " + std::string(e.what()));
  }
}

void apply_train(train::TrainConfig& t, const json& j) {
  reject_unknown(j, "train.",
                 {"epochs", "learning_rate", "batch", "checkpoint_every", "include_ssim"});
  pick(j, "epochs", "train.", t.epochs);
  pick(j, "learning_rate", "train.", t.lr);
  pick(j, "batch", "train.", t.batch);
  pick(j, "checkpoint_every", "train.", t.checkpoint_every);
  pick(j, "include_ssim", "train.", t.include_ssim);
}

}  // namespace

RunConfig profile_config(const std::string& name) {
  RunConfig rc;  // defaults are the desk profile
  if (name == "desk") {
    rc.data.count = 100;
    rc.data.coils = 4;
    rc.data.h = rc.data.w = 32;
    rc.data.mask.accel = 4.0;
    rc.data.noise_sigma = 0.01;
    rc.model.k = 3;
    rc.train.epochs = 15;
    rc.train.lr = 1e-3;
    return rc;
  }
  if (name == "smoke") {
    rc.data.count = 6;
    rc.data.coils = 2;
    rc.data.h = rc.data.w = 8;
    rc.data.mask.accel = 2.0;
    rc.data.mask.center_lines = 2;
    rc.model.k = 2;
    rc.model.sparse_width = 8;
    rc.model.lowrank_ch = {4, 8};
    rc.model.gsam_hidden = 4;
    rc.model.correction_ch = {2, 4};
    rc.train.epochs = 5;  // 4 training slices at batch 2: ten optimizer steps
    rc.train.batch = 2;
    rc.train.include_ssim = false;  // image smaller than the comparison window
    return rc;
  }
  throw std::invalid_argument("config: unknown profile '" + name + "' (desk, smoke)");
}

void apply_document(RunConfig& rc, const json& doc) {
  reject_unknown(doc, "", {"seed", "output_root", "data", "model", "train"});
  pick(doc, "seed", "", rc.seed);
  pick(doc, "output_root", "", rc.output_root);
  if (doc.contains("data")) apply_data(rc.data, doc.at("data"));
  if (doc.contains("model")) apply_model(rc.model, doc.at("model"));
  if (doc.contains("train")) apply_train(rc.train, doc.at("train"));
}

json to_json(const RunConfig& rc) {
  json mask{{"kind", simdata::mask_kind_name(rc.data.mask.kind)},
            {"acceleration", rc.data.mask.accel},
            {"center_lines", rc.data.mask.center_lines}};
  json data{{"count", rc.data.count},     {"coils", rc.data.coils},
            {"height", rc.data.h},        {"width", rc.data.w},
            {"noise_sigma", rc.data.noise_sigma}, {"mask", mask}};
  json train{{"epochs", rc.train.epochs},
             {"learning_rate", rc.train.lr},
             {"batch", rc.train.batch},
             {"checkpoint_every", rc.train.checkpoint_every},
             {"include_ssim", rc.train.include_ssim}};
  return json{{"seed", rc.seed},
              {"output_root", rc.output_root},
              {"data", data},
              {"model", ckpt::config_to_json(rc.model)},
              {"train", train}};
}

RunConfig resolve(const std::optional<std::string>& profile,
                  const std::optional<std::string>& config_path, const FlagOverrides& flags) {
  RunConfig rc = profile ? profile_config(*profile) : RunConfig{};
  if (const char* env = std::getenv("MCUNET_OUT"); env && *env) rc.output_root = env;
  if (config_path) {
    std::ifstream f(*config_path);
    require(f.good(), "config: cannot open " + *config_path);
    json doc;
    try {
      doc = json::parse(f);
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: " + *config_path + ": " + e.what());
    }
    apply_document(rc, doc);
  }
  if (flags.seed) rc.seed = *flags.seed;
  if (flags.variant) rc.model.variant = parse_variant(*flags.variant);

  require(rc.data.count >= 1, "config: data.count must be >= 1");
  require(rc.data.coils >= 1, "config: data.coils must be >= 1");
  require(rc.data.h >= 1 && rc.data.w >= 1, "config: empty data grid");
  require(rc.data.noise_sigma >= 0.0, "config: negative noise sigma");
  require(rc.data.mask.accel >= 1.0, "config: acceleration must be >= 1");
  require(!rc.output_root.empty(), "config: empty output root");
  return rc;
}

std::uint64_t data_seed(const RunConfig& rc) { return derive_seed(rc.seed, "data"); }
std::uint64_t train_seed(const RunConfig& rc) { return derive_seed(rc.seed, "train"); }

void write_resolved(const RunConfig& rc, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/config.json";
  std::ofstream f(path, std::ios::trunc);
  require(f.good(), "config: cannot write " + path);
  f << to_json(rc).dump(2) << "\n";
  require(f.good(), "config: short write to " + path);
}

}  // namespace mcu::cfg

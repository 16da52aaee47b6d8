#include "mcunet/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <set>

namespace mcu::ckpt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint binaries are specified little-endian");

using nlohmann::json;

nlohmann::json config_to_json(const ModelConfig& cfg) {
  return json{{"k", cfg.k},
              {"variant", variant_name(cfg.variant)},
              {"sparse_width", cfg.sparse_width},
              {"lowrank_ch", cfg.lowrank_ch},
              {"gsam_hidden", cfg.gsam_hidden},
              {"correction_ch", cfg.correction_ch}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> allowed{"k",           "variant",     "sparse_width",
                                             "lowrank_ch",  "gsam_hidden", "correction_ch"};
  require(j.is_object(), "model config: expected an object");
  for (const auto& item : j.items())
    require(allowed.count(item.key()) != 0, "model config: unknown key '" + item.key() + "'");
  ModelConfig cfg;
  try {
    cfg.k = j.at("k").get<int>();
    cfg.variant = parse_variant(j.at("variant").get<std::string>());
    cfg.sparse_width = j.at("sparse_width").get<int>();
    cfg.lowrank_ch = j.at("lowrank_ch").get<std::vector<int>>();
    cfg.gsam_hidden = j.at("gsam_hidden").get<int>();
    cfg.correction_ch = j.at("correction_ch").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("model config: " + std::string(e.what()));
  }
  require(cfg.k >= 1, "model config: k must be >= 1");
  require(cfg.sparse_width >= 1 && cfg.gsam_hidden >= 1, "model config: widths must be >= 1");
  require(!cfg.lowrank_ch.empty() && !cfg.correction_ch.empty(),
          "model config: channel lists must be non-empty");
  return cfg;
}

namespace {

void write_fp64(std::ofstream& f, const Tensor& t) {
  f.write(reinterpret_cast<const char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

void read_fp64(std::ifstream& f, Tensor& t) {
  f.read(reinterpret_cast<char*>(t.data()),
         static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& c) {
  require(!c.params.items.empty(), "save_checkpoint: empty parameter set");
  std::filesystem::path root(dir);
  std::filesystem::create_directories(root);

  json plist = json::array();
  for (const auto& [name, t] : c.params.items) plist.push_back({{"name", name}, {"shape", t.shape()}});

  const bool has_optim = !c.optim.m.empty();
  if (has_optim)
    require(c.optim.m.size() == c.params.items.size() && c.optim.v.size() == c.params.items.size(),
            "save_checkpoint: optimizer state does not match the parameter set");

  json manifest{{"format", "mcunet-checkpoint"},
                {"version", 1},
                {"config", config_to_json(c.config)},
                {"params", plist},
                {"optimizer", {{"present", has_optim}, {"step", c.optim.step}}},
                {"extra", c.extra.is_null() ? json::object() : c.extra}};
  std::ofstream mf(root / "manifest.json");
  require(mf.good(), "save_checkpoint: cannot open manifest.json");
  mf << manifest.dump(2) << "\n";
  require(mf.good(), "save_checkpoint: short write to manifest.json");

  std::ofstream pf(root / "params.bin", std::ios::binary);
  require(pf.good(), "save_checkpoint: cannot open params.bin");
  for (const auto& [name, t] : c.params.items) write_fp64(pf, t);
  require(pf.good(), "save_checkpoint: short write to params.bin");

  if (has_optim) {
    std::ofstream of(root / "optim.bin", std::ios::binary);
    require(of.good(), "save_checkpoint: cannot open optim.bin");
    for (const Tensor& t : c.optim.m) write_fp64(of, t);
    for (const Tensor& t : c.optim.v) write_fp64(of, t);
    require(of.good(), "save_checkpoint: short write to optim.bin");
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::filesystem::path root(dir);
  std::ifstream mf(root / "manifest.json");
  require(mf.good(), "load_checkpoint: cannot open " + (root / "manifest.json").string());
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw std::invalid_argument("load_checkpoint: bad manifest.json: " + std::string(e.what()));
  }
  require(manifest.value("format", "") == "mcunet-checkpoint", "load_checkpoint: unknown format");
  require(manifest.value("version", 0) == 1, "load_checkpoint: unsupported version");

  Checkpoint c;
  c.config = config_from_json(manifest.at("config"));
  c.extra = manifest.value("extra", json::object());

  // the manifest listing must match the registry the config builds
  nn::ParamSet expect = build_params(c.config, 0);
  const json& plist = manifest.at("params");
  require(plist.is_array() && plist.size() == expect.items.size(),
          "load_checkpoint: parameter list does not match the model config");
  std::int64_t total = 0;
  for (std::size_t i = 0; i < expect.items.size(); ++i) {
    const auto& [name, t] = expect.items[i];
    require(plist[i].at("name").get<std::string>() == name,
            "load_checkpoint: parameter name mismatch at index " + std::to_string(i));
    require(plist[i].at("shape").get<std::vector<int>>() == t.shape(),
            "load_checkpoint: shape mismatch for " + name);
    total += t.numel();
  }

  auto check_size = [&](const std::filesystem::path& p, std::int64_t doubles) {
    require(std::filesystem::exists(p), "load_checkpoint: missing " + p.string());
    auto bytes = static_cast<std::int64_t>(std::filesystem::file_size(p));
    require(bytes == doubles * static_cast<std::int64_t>(sizeof(double)),
            "load_checkpoint: " + p.string() + " has " + std::to_string(bytes) +
                " bytes, expected " + std::to_string(doubles * sizeof(double)));
  };

  check_size(root / "params.bin", total);
  std::ifstream pf(root / "params.bin", std::ios::binary);
  for (auto& [name, t] : expect.items) {
    read_fp64(pf, t);
    c.params.add(name, t);
  }
  require(pf.good(), "load_checkpoint: short read from params.bin");

  const json& opt = manifest.at("optimizer");
  if (opt.at("present").get<bool>()) {
    c.optim.step = opt.at("step").get<std::int64_t>();
    check_size(root / "optim.bin", 2 * total);
    std::ifstream of(root / "optim.bin", std::ios::binary);
    for (const auto& [name, t] : c.params.items) {
      Tensor mo(t.shape());
      read_fp64(of, mo);
      c.optim.m.push_back(std::move(mo));
    }
    for (const auto& [name, t] : c.params.items) {
      Tensor vo(t.shape());
      read_fp64(of, vo);
      c.optim.v.push_back(std::move(vo));
    }
    require(of.good(), "load_checkpoint: short read from optim.bin");
  } else {
    c.optim.step = opt.at("step").get<std::int64_t>();
  }
  return c;
}

}  // namespace mcu::ckpt

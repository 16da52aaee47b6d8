#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <mcunet/cli.hpp>

// Exit codes: 0 success, 1 validation error (bad flags, config, or inputs),
// 2 runtime failure.

namespace {

struct Common {
  std::optional<std::string> config, profile;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
};

void add_common(CLI::App& cmd, Common& c) {
  cmd.add_option("--config", [&c](const auto& v) { return c.config = v[0], true; },
                 "JSON run configuration")
      ->type_name("PATH");
  cmd.add_option("--profile", [&c](const auto& v) { return c.profile = v[0], true; },
                 "named preset applied before the config file")
      ->type_name("NAME")
      ->check(CLI::IsMember({"desk", "smoke"}));
  cmd.add_option("--seed", [&c](const auto& v) { return c.seed = std::stoull(v[0]), true; },
                 "root random seed")
      ->type_name("N");
  cmd.add_option("--variant", [&c](const auto& v) { return c.variant = v[0], true; },
                 "model variant override")
      ->type_name("NAME");
}

std::string or_default(const std::string& value, const std::string& fallback) {
  return value.empty() ? fallback : value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-prior unfolding reconstruction toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string out_dir, data_dir, ckpt_dir, records, split = "test", variants_csv;
  int slices = 4;

  CLI::App* generate = app.add_subcommand("generate", "synthesize dataset splits");
  generate->add_option("--out", out_dir, "output directory")->type_name("DIR");

  CLI::App* train = app.add_subcommand("train", "train a model on a generated dataset");
  train->add_option("--data", data_dir, "dataset root from `generate`")->type_name("DIR");
  train->add_option("--out", out_dir, "run output directory")->type_name("DIR");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval->add_option("--ckpt", ckpt_dir, "checkpoint directory")->type_name("DIR");
  eval->add_option("--data", data_dir, "dataset root")->type_name("DIR");
  eval->add_option("--split", split, "dataset split (default test)");
  eval->add_option("--out", out_dir, "output directory")->type_name("DIR");

  CLI::App* recon = app.add_subcommand("reconstruct", "write reconstructions for a split");
  recon->add_option("--ckpt", ckpt_dir, "checkpoint directory")->type_name("DIR");
  recon->add_option("--data", data_dir, "dataset root")->type_name("DIR");
  recon->add_option("--split", split, "dataset split (default test)");
  recon->add_option("--out", out_dir, "output directory")->type_name("DIR");

  CLI::App* ablate = app.add_subcommand("ablate", "train and compare model variants");
  ablate->add_option("--variants", variants_csv, "comma-separated variant names (default: all)");
  ablate->add_option("--data", data_dir, "dataset root")->type_name("DIR");
  ablate->add_option("--out", out_dir, "output directory")->type_name("DIR");

  CLI::App* flops = app.add_subcommand("flops", "analytic cost report");
  flops->add_option("--out", out_dir, "output directory")->type_name("DIR");

  CLI::App* plot = app.add_subcommand("plot", "emit curves and reconstruction grids");
  plot->add_option("--records", records, "metrics.jsonl from `train`")->type_name("PATH");
  plot->add_option("--ckpt", ckpt_dir, "checkpoint directory")->type_name("DIR");
  plot->add_option("--data", data_dir, "dataset root")->type_name("DIR");
  plot->add_option("--split", split, "dataset split (default test)");
  plot->add_option("--slices", slices, "number of reconstruction grids");
  plot->add_option("--out", out_dir, "output directory")->type_name("DIR");

  for (CLI::App* cmd : {generate, train, eval, recon, ablate, flops, plot})
    add_common(*cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const mcu::cfg::RunConfig rc =
        mcu::cfg::resolve(common.profile, common.config, {common.seed, common.variant});
    const std::string root = rc.output_root;
    const std::string data = or_default(data_dir, root + "/data");
    const std::string ckpt = or_default(ckpt_dir, root + "/train/checkpoints/best");

    if (generate->parsed()) {
      mcu::cli::run_generate(rc, or_default(out_dir, root + "/data"), std::cout);
    } else if (train->parsed()) {
      mcu::cli::run_train(rc, data, or_default(out_dir, root + "/train"), std::cout);
    } else if (eval->parsed()) {
      mcu::cli::run_eval(rc, ckpt, data, split, or_default(out_dir, root + "/eval"), std::cout);
    } else if (recon->parsed()) {
      mcu::cli::run_reconstruct(rc, ckpt, data, split, or_default(out_dir, root + "/recon"),
                                std::cout);
    } else if (ablate->parsed()) {
      std::vector<std::string> names;
      if (variants_csv.empty()) {
        for (mcu::Variant v : mcu::all_variants()) names.push_back(mcu::variant_name(v));
      } else {
        std::string cur;
        for (char ch : variants_csv + ",") {
          if (ch == ',') {
            if (!cur.empty()) names.push_back(cur);
            cur.clear();
          } else {
            cur += ch;
          }
        }
      }
      mcu::cli::run_ablate(rc, names, data, or_default(out_dir, root + "/ablate"), std::cout);
    } else if (flops->parsed()) {
      mcu::cli::run_flops(rc, or_default(out_dir, root + "/flops"), std::cout);
    } else if (plot->parsed()) {
      mcu::cli::run_plot(rc, or_default(records, root + "/train/metrics.jsonl"), ckpt, data,
                         split, slices, or_default(out_dir, root + "/plot"), std::cout);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

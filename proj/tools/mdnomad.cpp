// mdnomad command-line front end. Exit codes: 0 success, 2 usage/config
// errors, 3 numerical failures.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mdnomad/commands.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-density NOMAD surrogates for stochastic simulators"};
  app.set_version_flag("--version", mdnomad::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out, dataset, checkpoint, queries;
  std::optional<std::uint64_t> seed;
  int threads = mdnomad::default_threads();

  struct Entry {
    const char* name;
    const char* help;
    void (*run)(const mdnomad::RunConfig&, const mdnomad::CommandContext&);
  };
  const Entry entries[] = {
      {"generate", "simulate the experimental design and write the training dataset", mdnomad::cmd_generate},
      {"train", "train a surrogate on the dataset and write a checkpoint", mdnomad::cmd_train},
      {"evaluate", "score the checkpoint against reference distributions", mdnomad::cmd_evaluate},
      {"predict", "write PDFs and statistics at query points", mdnomad::cmd_predict},
      {"propagate", "write one-shot mean/std fields for one parameter", mdnomad::cmd_propagate},
      {"compare-kcde", "fit the KCDE baseline and score both estimators", mdnomad::cmd_compare_kcde},
      {"bench-timing", "time analytic inference against Monte Carlo plus KDE", mdnomad::cmd_bench_timing},
  };
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", config_path, "run configuration (JSON) or a manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (default $MDNOMAD_DATA_DIR/<problem> or runs/<problem>)");
    sub->add_option("--seed", seed, "master seed, overrides the config");
    sub->add_option("--threads", threads, "worker threads for generation and evaluation")->check(CLI::PositiveNumber);
    sub->add_option("--dataset", dataset, "dataset CSV (default <out>/dataset.csv)");
    sub->add_option("--checkpoint", checkpoint, "checkpoint (default <out>/checkpoint.json)");
    if (std::string(e.name) == "predict")
      sub->add_option("--queries", queries, "CSV of query points: parameter columns then decoder columns");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    mdnomad::RunConfig cfg = mdnomad::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg = mdnomad::parse_config(mdnomad::config_to_json(cfg));  // re-derive stage seeds
    }
    mdnomad::CommandContext ctx;
    ctx.out_dir = mdnomad::resolve_out_dir(out ? std::optional<std::filesystem::path>(*out) : std::nullopt, cfg.problem.name);
    ctx.threads = threads;
    ctx.config_path = config_path;
    if (dataset) ctx.dataset = *dataset;
    if (checkpoint) ctx.checkpoint = *checkpoint;
    if (queries) ctx.queries = *queries;
    for (const auto& e : entries)
      if (app.got_subcommand(e.name)) e.run(cfg, ctx);
    return 0;
  } catch (const mdnomad::Error& e) {
    std::cerr << "mdnomad: " << e.what() << "\n";
    return e.error_class() == mdnomad::ErrorClass::kUsage ? kExitUsage : kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "mdnomad: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "mdnomad: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "mdnomad: " << e.what() << "\n";
    return kExitNumerical;
  }
}

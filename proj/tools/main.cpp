#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tasktcn/common/errors.hpp"
#include "tasktcn/evaluation/tables.hpp"
#include "tasktcn/experiment/checkpoint.hpp"
#include "tasktcn/experiment/commands.hpp"

namespace fs = std::filesystem;
namespace ex = tasktcn::experiment;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct Common {
  std::string config;
  std::string profile = "paper";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--profile", c.profile, "preset when no config is given")
      ->check(CLI::IsMember({"fast", "paper"}));
  cmd->add_option("--seed", c.seed, "master seed (also the synthetic generator seed)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--data", c.data, "directory of park CSVs");
  cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores");
}

ex::ExperimentConfig resolve(const Common& c) {
  auto config = c.config.empty() ? ex::ExperimentConfig::preset(c.profile)
                                 : ex::ExperimentConfig::load(c.config);
  if (c.seed) {
    config.seed = *c.seed;
    config.synthetic.seed = *c.seed;
  }
  if (!c.out.empty()) config.output_dir = c.out;
  if (!c.data.empty()) config.dataset.path = c.data;
  if (c.threads) config.threads = *c.threads;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-embedding TCN forecasting toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ex::code_version());

  Common common;
  auto* synth = app.add_subcommand("synth", "write a synthetic park dataset");
  auto* train = app.add_subcommand("train-mtl", "multi-task training over all folds");
  auto* zero = app.add_subcommand("zero-shot", "DTW source selection and forecast of unseen parks");
  auto* fine = app.add_subcommand("finetune", "embedding-only finetuning on target parks");
  auto* grid = app.add_subcommand("gridsearch", "exhaustive grid with validation ranking");
  auto* analyze = app.add_subcommand("analyze-embedding", "distance matrices of a checkpoint");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every primitive");
  auto* evaluate = app.add_subcommand("evaluate", "test nRMSE of a checkpoint or skill of two metric files");
  for (auto* cmd : {synth, train, zero, fine, grid, evaluate}) add_common(cmd, common);

  std::string checkpoint, manifest;
  analyze->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  analyze->add_option("--out", common.out, "output directory");
  analyze->add_option("--manifest", manifest, "synth manifest with cluster labels");

  std::uint64_t gradcheck_seed = 2021;
  gradcheck->add_option("--seed", gradcheck_seed, "shape and value seed");

  std::string reference, baseline;
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint JSON");
  evaluate->add_option("--reference", reference, "metric rows of the reference model");
  evaluate->add_option("--baseline", baseline, "metric rows of the baseline model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (synth->parsed()) {
      const auto config = resolve(common);
      const fs::path out = common.out.empty() ? config.output_dir / "synthetic" : fs::path(common.out);
      ex::cmd_synth(config, out, std::cout);
    } else if (train->parsed()) {
      ex::cmd_train_mtl(resolve(common), std::cout);
    } else if (zero->parsed()) {
      ex::cmd_zero_shot(resolve(common), std::cout);
    } else if (fine->parsed()) {
      const auto result = ex::cmd_finetune(resolve(common), std::cout);
      for (const auto& r : result.runs) {
        if (r.status.rfind("failed: frozen", 0) == 0) return kRuntime;
      }
    } else if (grid->parsed()) {
      ex::cmd_gridsearch(resolve(common), std::cout);
    } else if (analyze->parsed()) {
      const fs::path out = common.out.empty() ? fs::path("analysis") : fs::path(common.out);
      ex::cmd_analyze_embedding(checkpoint, out, manifest, std::cout);
    } else if (gradcheck->parsed()) {
      return ex::cmd_gradcheck(gradcheck_seed, std::cout) ? kOk : kValidation;
    } else if (evaluate->parsed()) {
      if (!checkpoint.empty()) {
        const auto config = resolve(common);
        const auto rows = ex::evaluate_checkpoint(config, checkpoint);
        const fs::path out = config.output_dir / "evaluate" / "metrics.tsv";
        tasktcn::evaluation::write_metric_rows(out, rows);
        for (const auto& r : rows) {
          std::cout << r.park_id << '\t' << tasktcn::evaluation::format_number(r.nrmse) << '\n';
        }
      } else if (!reference.empty() && !baseline.empty()) {
        std::map<std::string, std::vector<tasktcn::evaluation::MetricRow>> metrics;
        auto ref = tasktcn::evaluation::read_metric_rows(reference);
        auto base = tasktcn::evaluation::read_metric_rows(baseline);
        for (auto& r : ref) r.model_id = "reference";
        for (auto& r : base) r.model_id = "baseline";
        metrics["reference"] = ref;
        metrics["baseline"] = base;
        const auto rows = ex::summarize(metrics, "baseline", "-");
        std::cout << tasktcn::evaluation::format_results_table(rows);
      } else {
        std::cerr << "evaluate needs --checkpoint or both --reference and --baseline\n";
        return kValidation;
      }
    }
  } catch (const tasktcn::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const tasktcn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kValidation;
  } catch (const tasktcn::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kValidation;
  } catch (const tasktcn::InsufficientData& e) {
    std::cerr << "insufficient data: " << e.what() << '\n';
    return kValidation;
  } catch (const tasktcn::UnknownTask& e) {
    std::cerr << "unknown task: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

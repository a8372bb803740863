// kernel-mor: data-driven balanced reduction of nonlinear control
// systems through kernel feature spaces.
//
// Subcommands run pipeline stages against artifacts in the output
// directory; `run` executes the whole pipeline. Exit codes: 0 success,
// 1 numerical error, 2 configuration error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kmor/errors.hpp"
#include "kmor/pipeline.hpp"
#include "kmor/simd/simd_ops.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "pipeline config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "artifact directory (overrides config)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&args](const std::uint64_t& v) { args.seed = v; },
      "seed override");
}

kmor::Pipeline make_pipeline(const CommonArgs& args) {
  std::optional<std::string> out;
  if (!args.out.empty()) out = args.out;
  kmor::PipelineConfig cfg = kmor::load_config(args.config, args.seed, out);
  return kmor::Pipeline(std::move(cfg), args.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel-space balanced model order reduction"};
  app.require_subcommand(1);

  CommonArgs run_args, sim_args, gram_args, bal_args, learn_args, red_args,
      eval_args;
  bool gram_export = false;
  std::string eval_input;

  CLI::App* cmd_run = app.add_subcommand("run", "run the full pipeline");
  add_common(cmd_run, run_args);
  CLI::App* cmd_sim =
      app.add_subcommand("simulate", "simulate the full-order system on the evaluation input");
  add_common(cmd_sim, sim_args);
  CLI::App* cmd_gram =
      app.add_subcommand("gramians", "run the excitation experiments and export the dataset");
  add_common(cmd_gram, gram_args);
  cmd_gram->add_flag("--export", gram_export,
                     "re-export the cached dataset (round-trip check)");
  CLI::App* cmd_bal = app.add_subcommand(
      "balance", "balance the kernel matrices and write the reduction bundle");
  add_common(cmd_bal, bal_args);
  CLI::App* cmd_learn =
      app.add_subcommand("learn", "fit the reduced dynamics and output models");
  add_common(cmd_learn, learn_args);
  CLI::App* cmd_red =
      app.add_subcommand("reduce", "simulate the closed reduced-order system");
  add_common(cmd_red, red_args);
  CLI::App* cmd_eval =
      app.add_subcommand("evaluate", "compare the reduced output against the original");
  add_common(cmd_eval, eval_args);
  cmd_eval->add_option("--input", eval_input,
                       "JSON file with an evaluation signal override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      kmor::Pipeline p = make_pipeline(run_args);
      const std::string dir = p.run_all();
      std::cout << "artifacts written to " << dir << " (simd: "
                << kmor::simd::active().name << ")\n";
    } else if (cmd_sim->parsed()) {
      make_pipeline(sim_args).run_stage(kmor::Stage::Simulate);
    } else if (cmd_gram->parsed()) {
      kmor::Pipeline p = make_pipeline(gram_args);
      if (gram_export) {
        // Round-trip the cached dataset: import and re-export.
        const std::string path = p.artifact_path("dataset.csv");
        const kmor::GramianDataset ds = kmor::read_dataset_csv(path);
        kmor::write_dataset_csv(ds, path);
        std::cout << "re-exported " << path << '\n';
      } else {
        p.run_stage(kmor::Stage::Gramians);
      }
    } else if (cmd_bal->parsed()) {
      make_pipeline(bal_args).run_stage(kmor::Stage::Balance);
    } else if (cmd_learn->parsed()) {
      make_pipeline(learn_args).run_stage(kmor::Stage::Learn);
    } else if (cmd_red->parsed()) {
      make_pipeline(red_args).run_stage(kmor::Stage::Reduce);
    } else if (cmd_eval->parsed()) {
      kmor::Pipeline p = make_pipeline(eval_args);
      if (!eval_input.empty()) {
        p.override_evaluation_signal(kmor::signal_from_json_file(
            eval_input, p.config().seed));
        p.run_stage(kmor::Stage::Simulate);
        p.run_stage(kmor::Stage::Reduce);
      }
      p.run_stage(kmor::Stage::Evaluate);
    }
  } catch (const kmor::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const kmor::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kmor/balancing.hpp"
#include "kmor/gramian.hpp"
#include "kmor/kernels.hpp"
#include "kmor/numerics.hpp"
#include "kmor/reduced.hpp"
#include "kmor/signals.hpp"
#include "kmor/systems.hpp"

namespace kmor {

// A kernel choice from config; gamma may be deferred to the
// mean-pairwise-distance heuristic ("auto").
struct KernelChoice {
  KernelSpec spec;
  bool gamma_auto = false;

  KernelSpec resolve(const Eigen::MatrixXd& train_inputs) const;
};

struct StageGrid {
  TimeGrid grid;
  std::vector<Signal> signals;  // empty for the gramian stage
};

struct PipelineConfig {
  int spec_version = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  ControlSystem system;
  ToleranceConfig tol;

  // gramian stage
  TimeGrid gramian_grid;
  KernelChoice gramian_kernel;

  // balance stage
  int order = 0;  // 0 = auto-gap
  double auto_gap_threshold = 10.0;
  ReductionScaling scaling = ReductionScaling::InputNormal;

  // learning stages
  StageGrid train_f;
  KernelChoice f_kernel;
  bool f_bias = true;
  std::vector<double> f_lambda_grid;

  StageGrid train_h;
  KernelChoice h_kernel;
  bool h_bias = true;
  std::vector<double> h_lambda_grid;

  // reduced simulation + evaluation
  JacobianMode jmode;
  StageGrid evaluation;
};

// Parses and validates a config file. Unknown keys are rejected.
// `seed_override`, when set, replaces the config seed;
// `out_override` replaces output_dir.
PipelineConfig load_config(const std::string& path,
                           std::optional<std::uint64_t> seed_override = {},
                           std::optional<std::string> out_override = {});

// Signal spec parsing (exposed for `evaluate --input`).
Signal signal_from_json_file(const std::string& path, std::uint64_t seed);

// Stage names in execution order.
enum class Stage { Gramians, Balance, Learn, Simulate, Reduce, Evaluate };
const char* stage_name(Stage s);

struct StageResult {
  std::vector<std::string> artifacts;  // paths written
};

class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, std::string config_path);

  // Runs one stage against prior artifacts on disk.
  StageResult run_stage(Stage s);

  // Runs every stage in order; returns the artifact directory.
  std::string run_all();

  // Swaps the evaluation signal (used by `evaluate --input`).
  void override_evaluation_signal(Signal s);

  const PipelineConfig& config() const { return cfg_; }
  std::string artifact_path(const std::string& name) const;

 private:
  struct LoadedReduction;

  StageResult stage_gramians();
  StageResult stage_balance();
  StageResult stage_learn();
  StageResult stage_simulate();
  StageResult stage_reduce();
  StageResult stage_evaluate();

  // Loads an upstream artifact, failing with an actionable message when
  // missing and a staleness note when older than the config file.
  void require_artifact(const std::string& name, const char* produced_by) const;
  void record_stage(Stage s, const StageResult& r);

  GramianDataset load_dataset() const;
  BalancedReduction load_reduction() const;
  ReducedSystem load_reduced_system() const;

  PipelineConfig cfg_;
  std::string config_path_;
  std::string fingerprint_;
};

std::string config_fingerprint(const std::string& config_path,
                               std::uint64_t seed);

}  // namespace kmor

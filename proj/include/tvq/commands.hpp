#pragma once

#include "tvq/checkpoint.hpp"
#include "tvq/config.hpp"

#include <memory>
#include <set>
#include <string>

namespace tvq {

/// Command-level path context (CLI flags --out-dir / --data-dir).
struct CliPaths {
  std::string out_dir = "out";
  std::string data_dir;  // overrides the config's data_dir when non-empty
};

std::string dataset_dir(const RunConfig& cfg, const CliPaths& paths);
std::string ckpt_path(const CliPaths& paths, const std::string& dataset, const std::string& stage);

/// Train the supervised classifier and persist it per dataset.
std::string cmd_train_fcn(const RunConfig& cfg, const CliPaths& paths);

/// Stage-1 tokenizer training; writes <dataset>.stage1.ckpt and a per-epoch
/// loss log. `resume` continues from a previous checkpoint.
std::string cmd_train_stage1(const RunConfig& cfg, const CliPaths& paths,
                             const std::string& resume = "");

/// Stage-2 prior training on top of a compatible stage-1 checkpoint.
std::string cmd_train_stage2(const RunConfig& cfg, const CliPaths& paths,
                             const std::string& stage1_ckpt, const std::string& resume = "");

struct GenerateArgs {
  int n_samples = 16;
  std::optional<int> class_index;
  std::optional<double> guidance_scale;  // config default when unset
  std::uint64_t seed = 0;
  bool keep_normalized = false;
  std::string out_path;
};

std::string cmd_generate(const RunConfig& cfg, const CliPaths& paths, const std::string& stage1_ckpt,
                         const std::string& stage2_ckpt, const GenerateArgs& args);

struct EvaluateArgs {
  std::set<std::string> metrics = {"fid", "is", "cas"};
  std::string stage1_ckpt, stage2_ckpt, fcn_ckpt;
  bool train_fcn_now = false;
  std::string replay;  // "", "train", or "test": oracle that resamples real data
  bool conditional = false;  // FID/IS on class-conditional samples drawn per the train distribution
  std::uint64_t seed = 0;
};

struct EvaluateResult {
  MetricReport report;
  std::optional<double> fid_std;
  std::string csv_path;
};

EvaluateResult cmd_evaluate(const RunConfig& cfg, const CliPaths& paths, const EvaluateArgs& args);

struct PlotArgs {
  std::string real_file, gen_file, fcn_ckpt, out_dir;
  std::uint64_t seed = 0;
  int tsne_iterations = 500;
};

void cmd_plot(const PlotArgs& args);

struct AblateArgs {
  std::vector<std::string> variants = {"timevqvae", "naive", "tf-nosep", "perceptual"};
  std::vector<double> guidance_sweep = {0.0, 1.0, 2.0, 4.0};
  std::uint64_t seed = 0;
};

/// Train and score each stage-1/stage-2 variant plus a guidance-scale sweep;
/// writes ablation.csv and returns its path.
std::string cmd_ablate(const RunConfig& cfg, const CliPaths& paths, const AblateArgs& args);

// ---------------------------------------------------------------------------
// Checkpoint <-> model plumbing shared by commands, tests, and acceptance.
// ---------------------------------------------------------------------------

struct LoadedStage1 {
  RunConfig cfg;
  std::unique_ptr<Stage1Model> model;
  double norm_mean = 0.0, norm_std = 1.0;
  int series_length = 0;
  int n_classes = 0;
  std::string config_hash;
  int epoch = 0;
};

LoadedStage1 load_stage1(const std::string& path);

struct LoadedStage2 {
  PriorSet priors;
  std::string stage1_hash;
  int epoch = 0;
};

LoadedStage2 load_stage2(const std::string& path, const Stage1Model& stage1, int n_classes,
                         const RunConfig& cfg);

struct LoadedFcn {
  std::unique_ptr<FcnModel> model;
  double norm_mean = 0.0, norm_std = 1.0;
  int n_classes = 0;
};

LoadedFcn load_fcn(const std::string& path);

Checkpoint make_stage1_checkpoint(const RunConfig& cfg, Stage1Model& model, double norm_mean,
                                  double norm_std, int n_classes, int epoch, nn::AdamW* opt);
Checkpoint make_stage2_checkpoint(const RunConfig& cfg, PriorSet& priors,
                                  const std::string& stage1_hash, int epoch, nn::AdamW* opt);
Checkpoint make_fcn_checkpoint(FcnModel& model, double norm_mean, double norm_std,
                               const std::string& dataset);

}  // namespace tvq

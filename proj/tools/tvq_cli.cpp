#include "tvq/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

tvq::RunConfig load_config(const std::string& config_path, std::optional<std::uint64_t> seed,
                           const std::string& data_dir) {
  tvq::RunConfig cfg = config_path.empty() ? tvq::RunConfig{} : tvq::RunConfig::load(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.stage1.seed = *seed;
    cfg.stage2.seed = *seed;
    cfg.fcn.seed = *seed;
  }
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tvq: two-stage vector-quantized time series generation"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "out";
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Run configuration (JSON)");
  app.add_option("--seed", seed, "Root seed override");
  app.add_option("--data-dir", data_dir, "Directory of <Name>/<Name>_{TRAIN,TEST}.tsv");
  app.add_option("--out-dir", out_dir, "Output directory for checkpoints and reports");

  auto* c_fcn = app.add_subcommand("train-fcn", "Train the supervised classifier");

  std::string resume;
  auto* c_s1 = app.add_subcommand("train-stage1", "Train the tokenizer (encoders, codebooks, decoders)");
  c_s1->add_option("--resume", resume, "Continue from a stage-1 checkpoint");

  std::string s1_path, s2_path, resume2;
  auto* c_s2 = app.add_subcommand("train-stage2", "Train the bidirectional priors");
  c_s2->add_option("--stage1", s1_path, "Stage-1 checkpoint")->required();
  c_s2->add_option("--resume", resume2, "Continue from a stage-2 checkpoint");

  tvq::GenerateArgs gen_args;
  int gen_class = -1;
  double gen_alpha = -1.0;
  auto* c_gen = app.add_subcommand("generate", "Sample synthetic series");
  c_gen->add_option("--stage1", s1_path, "Stage-1 checkpoint")->required();
  c_gen->add_option("--stage2", s2_path, "Stage-2 checkpoint")->required();
  c_gen->add_option("-n,--n-samples", gen_args.n_samples, "Sample count");
  c_gen->add_option("--class", gen_class, "Class index for conditional sampling");
  c_gen->add_option("--guidance-scale", gen_alpha, "Guidance scale override");
  c_gen->add_option("--gen-seed", gen_args.seed, "Generation seed");
  c_gen->add_flag("--normalized", gen_args.keep_normalized, "Keep samples in normalized units");
  c_gen->add_option("-o,--output", gen_args.out_path, "Output sample file (UCR text format)");

  tvq::EvaluateArgs eval_args;
  std::vector<std::string> metric_list;
  auto* c_eval = app.add_subcommand("evaluate", "Compute FID / IS / CAS against the real test split");
  c_eval->add_option("--stage1", eval_args.stage1_ckpt, "Stage-1 checkpoint");
  c_eval->add_option("--stage2", eval_args.stage2_ckpt, "Stage-2 checkpoint");
  c_eval->add_option("--fcn", eval_args.fcn_ckpt, "Pretrained FCN checkpoint");
  c_eval->add_flag("--train-fcn", eval_args.train_fcn_now, "Train the FCN now and use it");
  c_eval->add_option("--metrics", metric_list, "Subset of fid,is,cas")->delimiter(',');
  c_eval->add_option("--replay", eval_args.replay, "Replay oracle: 'train' or 'test'");
  c_eval->add_flag("--conditional", eval_args.conditional, "Class-conditional FID/IS generation");
  c_eval->add_option("--eval-seed", eval_args.seed, "Evaluation seed");

  tvq::PlotArgs plot_args;
  auto* c_plot = app.add_subcommand("plot", "PCA / t-SNE embeddings of real vs generated samples");
  c_plot->add_option("--real", plot_args.real_file, "Real sample file")->required();
  c_plot->add_option("--gen", plot_args.gen_file, "Generated sample file")->required();
  c_plot->add_option("--fcn", plot_args.fcn_ckpt, "Pretrained FCN checkpoint")->required();
  c_plot->add_option("--plot-out", plot_args.out_dir, "Plot output directory");
  c_plot->add_option("--plot-seed", plot_args.seed, "t-SNE seed");

  tvq::AblateArgs ablate_args;
  auto* c_abl = app.add_subcommand("ablate", "Run the ablation toggle matrix and guidance sweep");
  c_abl->add_option("--variants", ablate_args.variants,
                    "Subset of timevqvae,naive,tf-nosep,perceptual")
      ->delimiter(',');
  c_abl->add_option("--guidance-sweep", ablate_args.guidance_sweep, "Guidance scales to sweep")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    const tvq::RunConfig cfg = load_config(config_path, seed, data_dir);
    tvq::CliPaths paths;
    paths.out_dir = out_dir;
    paths.data_dir = data_dir;

    if (c_fcn->parsed()) {
      std::cout << cmd_train_fcn(cfg, paths) << "\n";
    } else if (c_s1->parsed()) {
      std::cout << cmd_train_stage1(cfg, paths, resume) << "\n";
    } else if (c_s2->parsed()) {
      std::cout << cmd_train_stage2(cfg, paths, s1_path, resume2) << "\n";
    } else if (c_gen->parsed()) {
      if (gen_class >= 0) gen_args.class_index = gen_class;
      if (gen_alpha >= 0.0) gen_args.guidance_scale = gen_alpha;
      std::cout << cmd_generate(cfg, paths, s1_path, s2_path, gen_args) << "\n";
    } else if (c_eval->parsed()) {
      if (!metric_list.empty())
        eval_args.metrics = std::set<std::string>(metric_list.begin(), metric_list.end());
      const tvq::EvaluateResult r = cmd_evaluate(cfg, paths, eval_args);
      std::cout << r.csv_path << "\n";
    } else if (c_plot->parsed()) {
      if (plot_args.out_dir.empty()) plot_args.out_dir = out_dir + "/plots";
      plot_args.seed = seed.value_or(plot_args.seed);
      cmd_plot(plot_args);
      std::cout << plot_args.out_dir << "\n";
    } else if (c_abl->parsed()) {
      ablate_args.seed = cfg.seed;
      std::cout << cmd_ablate(cfg, paths, ablate_args) << "\n";
    }
  } catch (const tvq::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

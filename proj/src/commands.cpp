#include "tvq/commands.hpp"

#include "tvq/embed.hpp"
#include "tvq/sampler.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tvq {

namespace fs = std::filesystem;

std::string dataset_dir(const RunConfig& cfg, const CliPaths& paths) {
  return paths.data_dir.empty() ? cfg.data_dir : paths.data_dir;
}

std::string ckpt_path(const CliPaths& paths, const std::string& dataset, const std::string& stage) {
  return paths.out_dir + "/" + dataset + "." + stage + ".ckpt";
}

namespace {

void ensure_out_dir(const CliPaths& paths) { fs::create_directories(paths.out_dir); }

struct NormalizedData {
  TimeSeriesDataset train, test;
};

NormalizedData load_normalized(const RunConfig& cfg, const CliPaths& paths) {
  const std::string dir = dataset_dir(cfg, paths);
  TimeSeriesDataset train = load_ucr_dir(dir, cfg.dataset_name, Split::train);
  TimeSeriesDataset test = load_ucr_dir(dir, cfg.dataset_name, Split::test);
  NormalizedData out;
  if (cfg.per_series_norm) {
    out.train = normalize_per_series(train);
    out.test = normalize_per_series(test);
  } else {
    out.train = normalize(train);
    out.test = normalize_with(test, out.train.mean, out.train.std);
  }
  return out;
}

std::string losses_path(const CliPaths& paths, const std::string& dataset, const std::string& stage) {
  return paths.out_dir + "/" + dataset + "." + stage + ".losses.csv";
}

}  // namespace

// ---------------------------------------------------------------- fcn ------

Checkpoint make_fcn_checkpoint(FcnModel& model, double norm_mean, double norm_std,
                               const std::string& dataset) {
  Checkpoint c;
  c.stage = 3;
  c.meta["dataset"] = dataset;
  c.meta["n_classes"] = model.n_classes();
  c.meta["norm_mean"] = norm_mean;
  c.meta["norm_std"] = norm_std;
  c.meta["test_accuracy"] = model.test_accuracy;
  nn::Registry reg;
  model.register_state(reg);
  c.tensors = snapshot_registry(reg);
  return c;
}

LoadedFcn load_fcn(const std::string& path) {
  const Checkpoint c = load_checkpoint(path);
  if (c.stage != 3) throw ConfigError("load_fcn: " + path + " is not an FCN checkpoint");
  LoadedFcn out;
  out.n_classes = c.meta.at("n_classes").get<int>();
  out.norm_mean = c.meta.at("norm_mean").get<double>();
  out.norm_std = c.meta.at("norm_std").get<double>();
  out.model = std::make_unique<FcnModel>(out.n_classes, 0);
  out.model->test_accuracy = c.meta.value("test_accuracy", -1.0);
  nn::Registry reg;
  out.model->register_state(reg);
  restore_registry(reg, c.tensors);
  out.model->set_train(false);
  return out;
}

std::string cmd_train_fcn(const RunConfig& cfg, const CliPaths& paths) {
  ensure_out_dir(paths);
  const NormalizedData data = load_normalized(cfg, paths);
  const std::string log_path = losses_path(paths, cfg.dataset_name, "fcn");
  std::ofstream log(log_path);
  log << "epoch,loss\n";
  FcnModel model = train_fcn(data.train, data.test, cfg.fcn,
                             [&log](int epoch, double loss) { log << epoch << ',' << loss << '\n'; });
  const std::string path = ckpt_path(paths, cfg.dataset_name, "fcn");
  save_checkpoint(path, make_fcn_checkpoint(model, data.train.mean, data.train.std, cfg.dataset_name));
  return path;
}

// -------------------------------------------------------------- stage 1 ----

Checkpoint make_stage1_checkpoint(const RunConfig& cfg, Stage1Model& model, double norm_mean,
                                  double norm_std, int n_classes, int epoch, nn::AdamW* opt) {
  Checkpoint c;
  c.stage = 1;
  c.meta["run_config"] = cfg.to_json();
  c.meta["config_hash"] = cfg.hash();
  c.meta["dataset"] = cfg.dataset_name;
  c.meta["norm_mean"] = norm_mean;
  c.meta["norm_std"] = norm_std;
  c.meta["series_length"] = model.series_length();
  c.meta["n_classes"] = n_classes;
  c.meta["epoch"] = epoch;
  nn::Registry reg;
  model.register_state(reg);
  c.tensors = snapshot_registry(reg);
  if (opt != nullptr) append_optimizer_state(c, *opt);
  return c;
}

LoadedStage1 load_stage1(const std::string& path) {
  const Checkpoint c = load_checkpoint(path);
  if (c.stage != 1) throw ConfigError("load_stage1: " + path + " is not a stage-1 checkpoint");
  LoadedStage1 out;
  out.cfg = RunConfig::from_json(c.meta.at("run_config"));
  out.norm_mean = c.meta.at("norm_mean").get<double>();
  out.norm_std = c.meta.at("norm_std").get<double>();
  out.series_length = c.meta.at("series_length").get<int>();
  out.n_classes = c.meta.at("n_classes").get<int>();
  out.config_hash = c.meta.at("config_hash").get<std::string>();
  out.epoch = c.meta.value("epoch", 0);
  out.model = std::make_unique<Stage1Model>(out.cfg.make_stage1_config(), out.series_length,
                                            out.cfg.seed);
  nn::Registry reg;
  out.model->register_state(reg);
  restore_registry(reg, c.tensors);
  out.model->set_train(false);
  return out;
}

std::string cmd_train_stage1(const RunConfig& cfg, const CliPaths& paths, const std::string& resume) {
  ensure_out_dir(paths);
  const NormalizedData data = load_normalized(cfg, paths);

  std::unique_ptr<FcnModel> perceptual_fcn;
  if (cfg.perceptual_loss) {
    const std::string fcn_file = ckpt_path(paths, cfg.dataset_name, "fcn");
    if (!fs::exists(fcn_file))
      throw ConfigError("train-stage1: perceptual loss needs a pretrained FCN; run train-fcn first (missing " +
                        fcn_file + ")");
    perceptual_fcn = load_fcn(fcn_file).model;
  }

  std::unique_ptr<Stage1Model> model;
  int start_epoch = 0;
  std::unique_ptr<nn::AdamW> opt;
  nn::Registry reg;
  if (!resume.empty()) {
    LoadedStage1 loaded = load_stage1(resume);
    if (loaded.config_hash != cfg.hash())
      throw ConfigError("train-stage1: resume config hash " + loaded.config_hash +
                        " does not match current config hash " + cfg.hash());
    model = std::move(loaded.model);
    start_epoch = loaded.epoch;
    model->register_state(reg);
    opt = std::make_unique<nn::AdamW>(reg.params, cfg.stage1.weight_decay);
    restore_optimizer_state(load_checkpoint(resume), *opt);
  } else {
    model = std::make_unique<Stage1Model>(cfg.make_stage1_config(), data.train.length(), cfg.seed);
    model->register_state(reg);
    opt = std::make_unique<nn::AdamW>(reg.params, cfg.stage1.weight_decay);
  }

  const std::string log_path = losses_path(paths, cfg.dataset_name, "stage1");
  std::ofstream log(log_path, start_epoch > 0 ? std::ios::app : std::ios::out);
  if (start_epoch == 0)
    log << "epoch,total,codebook,time_lf,time_hf,tf_lf,tf_hf,perceptual\n";
  Stage1TrainOptions opts = cfg.stage1;
  train_stage1(*model, data.train, opts, perceptual_fcn.get(), start_epoch, opt.get(),
               [&log](int epoch, const Stage1Losses& l) {
                 log << epoch << ',' << l.total << ',' << l.codebook << ',' << l.recons_time_lf
                     << ',' << l.recons_time_hf << ',' << l.recons_tf_lf << ',' << l.recons_tf_hf
                     << ',' << l.perceptual << '\n';
               });

  const std::string path = ckpt_path(paths, cfg.dataset_name, "stage1");
  save_checkpoint(path, make_stage1_checkpoint(cfg, *model, data.train.mean, data.train.std,
                                               data.train.n_classes(), opts.epochs, opt.get()));
  return path;
}

// -------------------------------------------------------------- stage 2 ----

Checkpoint make_stage2_checkpoint(const RunConfig& cfg, PriorSet& priors,
                                  const std::string& stage1_hash, int epoch, nn::AdamW* opt) {
  Checkpoint c;
  c.stage = 2;
  c.meta["run_config"] = cfg.to_json();
  c.meta["config_hash"] = cfg.hash();
  c.meta["stage1_hash"] = stage1_hash;
  c.meta["epoch"] = epoch;
  nn::Registry reg;
  priors.register_state(reg);
  c.tensors = snapshot_registry(reg);
  if (opt != nullptr) append_optimizer_state(c, *opt);
  return c;
}

LoadedStage2 load_stage2(const std::string& path, const Stage1Model& stage1, int n_classes,
                         const RunConfig& cfg) {
  const Checkpoint c = load_checkpoint(path);
  if (c.stage != 2) throw ConfigError("load_stage2: " + path + " is not a stage-2 checkpoint");
  LoadedStage2 out{PriorSet::create(cfg.make_prior_config(n_classes), stage1, cfg.seed), "", 0};
  out.stage1_hash = c.meta.at("stage1_hash").get<std::string>();
  out.epoch = c.meta.value("epoch", 0);
  nn::Registry reg;
  out.priors.register_state(reg);
  restore_registry(reg, c.tensors);
  return out;
}

std::string cmd_train_stage2(const RunConfig& cfg, const CliPaths& paths,
                             const std::string& stage1_ckpt, const std::string& resume) {
  ensure_out_dir(paths);
  LoadedStage1 s1 = load_stage1(stage1_ckpt);
  if (s1.config_hash != cfg.hash())
    throw ConfigError("train-stage2: stage-1 checkpoint hash " + s1.config_hash +
                      " is incompatible with current config hash " + cfg.hash());
  const NormalizedData data = load_normalized(cfg, paths);

  PriorSet priors = PriorSet::create(cfg.make_prior_config(data.train.n_classes()), *s1.model,
                                     cfg.seed);
  nn::Registry reg;
  priors.register_state(reg);
  auto opt = std::make_unique<nn::AdamW>(reg.params, cfg.stage2.weight_decay);
  int start_epoch = 0;
  if (!resume.empty()) {
    const Checkpoint rc = load_checkpoint(resume);
    if (rc.meta.at("stage1_hash").get<std::string>() != s1.config_hash)
      throw ConfigError("train-stage2: resume checkpoint references stage-1 hash " +
                        rc.meta.at("stage1_hash").get<std::string>() + ", current stage-1 hash is " +
                        s1.config_hash);
    restore_registry(reg, rc.tensors);
    restore_optimizer_state(rc, *opt);
    start_epoch = rc.meta.value("epoch", 0);
  }

  const std::string log_path = losses_path(paths, cfg.dataset_name, "stage2");
  std::ofstream log(log_path, start_epoch > 0 ? std::ios::app : std::ios::out);
  if (start_epoch == 0) log << "epoch,masked_nll\n";
  train_stage2(priors, *s1.model, data.train, cfg.stage2, start_epoch, opt.get(),
               [&log](int epoch, double loss) { log << epoch << ',' << loss << '\n'; });

  const std::string path = ckpt_path(paths, cfg.dataset_name, "stage2");
  save_checkpoint(path,
                  make_stage2_checkpoint(cfg, priors, s1.config_hash, cfg.stage2.epochs, opt.get()));
  return path;
}

// -------------------------------------------------------------- generate ---

namespace {

struct GenerationStack {
  LoadedStage1 s1;
  LoadedStage2 s2;
};

GenerationStack load_generation_stack(const RunConfig& cfg, const std::string& stage1_ckpt,
                                      const std::string& stage2_ckpt) {
  GenerationStack g{load_stage1(stage1_ckpt),
                    LoadedStage2{PriorSet{}, "", 0}};
  g.s2 = load_stage2(stage2_ckpt, *g.s1.model, g.s1.n_classes, g.s1.cfg);
  if (g.s2.stage1_hash != g.s1.config_hash)
    throw ConfigError("generate: stage-2 checkpoint references stage-1 hash " + g.s2.stage1_hash +
                      " but the provided stage-1 checkpoint has hash " + g.s1.config_hash);
  (void)cfg;
  return g;
}

}  // namespace

std::string cmd_generate(const RunConfig& cfg, const CliPaths& paths, const std::string& stage1_ckpt,
                         const std::string& stage2_ckpt, const GenerateArgs& args) {
  ensure_out_dir(paths);
  GenerationStack g = load_generation_stack(cfg, stage1_ckpt, stage2_ckpt);

  GenerationRequest req;
  req.n_samples = args.n_samples;
  req.class_index = args.class_index;
  req.guidance_scale = args.guidance_scale.value_or(cfg.guidance_scale);
  req.seed = args.seed;
  req.decode = cfg.sampler;
  req.denormalize = !args.keep_normalized;
  const XMat samples = generate(req, *g.s1.model, g.s2.priors, g.s1.norm_mean, g.s1.norm_std);

  const std::string out_path = args.out_path.empty()
                                   ? paths.out_dir + "/" + cfg.dataset_name + ".generated.tsv"
                                   : args.out_path;
  std::ostringstream comment;
  comment << "generated-by: tvq\n";
  comment << "dataset: " << cfg.dataset_name << "\n";
  comment << "n_samples: " << req.n_samples << "\n";
  comment << "class: " << (req.class_index ? std::to_string(*req.class_index) : "unconditional")
          << "\n";
  comment << "guidance_scale: " << req.guidance_scale << "\n";
  comment << "seed: " << req.seed << "\n";
  comment << "normalized: " << (args.keep_normalized ? "yes" : "no");
  std::vector<int> labels(req.n_samples, req.class_index.value_or(-1));
  save_ucr(out_path, samples, labels, comment.str());
  return out_path;
}

// -------------------------------------------------------------- evaluate ---

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(acc / v.size()) : 0.0;
}

/// Resample `count` rows of the given samples (with replacement).
XMat resample_rows(const XMat& samples, int count, Rng& rng) {
  XMat out(count, samples.cols());
  for (int i = 0; i < count; ++i) out.row(i) = samples.row(rng.randint(static_cast<int>(samples.rows())));
  return out;
}

std::string csv_cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(6);
  os << *v;
  return os.str();
}

}  // namespace

EvaluateResult cmd_evaluate(const RunConfig& cfg, const CliPaths& paths, const EvaluateArgs& args) {
  ensure_out_dir(paths);
  const NormalizedData data = load_normalized(cfg, paths);
  const bool replay = !args.replay.empty();
  if (replay && args.replay != "train" && args.replay != "test")
    throw ConfigError("evaluate: --replay must be 'train' or 'test'");

  // Pretrained classifier.
  std::string fcn_file = args.fcn_ckpt.empty() ? ckpt_path(paths, cfg.dataset_name, "fcn")
                                               : args.fcn_ckpt;
  if (args.train_fcn_now) fcn_file = cmd_train_fcn(cfg, paths);
  if (!fs::exists(fcn_file))
    throw ConfigError("evaluate: missing pretrained FCN checkpoint " + fcn_file +
                      "; run train-fcn or pass --train-fcn");
  LoadedFcn fcn = load_fcn(fcn_file);

  std::optional<GenerationStack> stack;
  if (!replay) {
    if (args.stage1_ckpt.empty() || args.stage2_ckpt.empty())
      throw ConfigError("evaluate: stage-1 and stage-2 checkpoints are required (or --replay)");
    stack.emplace(load_generation_stack(cfg, args.stage1_ckpt, args.stage2_ckpt));
  }

  const int n_real = data.test.n();
  const int n_gen = eval_sample_count(n_real);
  const XMat feat_real = fcn.model->features(data.test.samples);

  EvaluateResult result;
  result.report.dataset = cfg.dataset_name;
  result.report.n_real = n_real;
  result.report.n_gen = n_gen;

  Rng root(args.seed);
  if (args.metrics.count("fid") || args.metrics.count("is")) {
    std::vector<double> fids, iss;
    for (int run = 0; run < cfg.eval_runs; ++run) {
      Rng run_rng = root.split("eval.run", run);
      XMat gen;
      if (replay) {
        const XMat& src = args.replay == "train" ? data.train.samples : data.test.samples;
        gen = resample_rows(src, n_gen, run_rng);
      } else if (args.conditional) {
        // Per-class counts proportional to the train distribution.
        const std::vector<int> counts = data.train.class_counts();
        const int total = std::accumulate(counts.begin(), counts.end(), 0);
        gen.resize(n_gen, data.train.length());
        int row = 0;
        for (std::size_t c = 0; c < counts.size(); ++c) {
          int want = static_cast<int>(std::llround(static_cast<double>(counts[c]) * n_gen / total));
          if (c + 1 == counts.size()) want = n_gen - row;
          if (want <= 0) continue;
          GenerationRequest req;
          req.n_samples = want;
          req.class_index = static_cast<int>(c);
          req.guidance_scale = cfg.guidance_scale;
          req.seed = run_rng.split("class", c).seed();
          req.decode = cfg.sampler;
          req.denormalize = false;
          const XMat xs = generate(req, *stack->s1.model, stack->s2.priors);
          gen.middleRows(row, want) = xs;
          row += want;
        }
      } else {
        GenerationRequest req;
        req.n_samples = n_gen;
        req.guidance_scale = cfg.guidance_scale;
        req.seed = run_rng.seed();
        req.decode = cfg.sampler;
        req.denormalize = false;  // metrics operate in normalized space
        gen = generate(req, *stack->s1.model, stack->s2.priors);
      }
      if (args.metrics.count("fid")) fids.push_back(fid(feat_real, fcn.model->features(gen)));
      if (args.metrics.count("is"))
        iss.push_back(inception_score(*fcn.model, gen, cfg.is_splits).first);
    }
    if (!fids.empty()) {
      result.report.fid_value = mean_of(fids);
      result.fid_std = std_of(fids);
    }
    if (!iss.empty()) {
      result.report.is_mean = mean_of(iss);
      result.report.is_std = std_of(iss);
    }
  }

  if (args.metrics.count("cas")) {
    if (data.train.n_classes() < 2)
      throw ConfigError("evaluate: CAS needs a class-conditional dataset (C >= 2)");
    ClassConditionalGenerator generator;
    if (replay) {
      const TimeSeriesDataset& src = args.replay == "train" ? data.train : data.test;
      std::vector<std::vector<int>> by_class(src.n_classes());
      for (int i = 0; i < src.n(); ++i) by_class[src.labels[i]].push_back(i);
      generator = [&src, by_class](int cls, int count, Rng& rng) {
        XMat out(count, src.length());
        const auto& rows = by_class[cls];
        if (rows.empty()) throw TvqError("replay: class has no real samples");
        for (int i = 0; i < count; ++i)
          out.row(i) = src.samples.row(rows[rng.randint(static_cast<int>(rows.size()))]);
        return out;
      };
    } else {
      Stage1Model* s1 = stack->s1.model.get();
      PriorSet* priors = &stack->s2.priors;
      const RunConfig* c = &cfg;
      generator = [s1, priors, c](int cls, int count, Rng& rng) {
        GenerationRequest req;
        req.n_samples = count;
        req.class_index = cls;
        req.guidance_scale = c->guidance_scale;
        req.seed = rng.engine()();
        req.decode = c->sampler;
        req.denormalize = false;
        return generate(req, *s1, *priors);
      };
    }
    FcnTrainOptions cas_opts = cfg.fcn;
    const auto [cas_mean, cas_std] =
        cas(generator, data.train, data.test, cfg.cas_runs, cas_opts, root.split("eval.cas").seed());
    result.report.cas_mean = cas_mean;
    result.report.cas_std = cas_std;
  }

  // Append one row to the machine-readable results table.
  result.csv_path = paths.out_dir + "/results.csv";
  const bool fresh = !fs::exists(result.csv_path);
  std::ofstream csv(result.csv_path, std::ios::app);
  if (fresh) csv << "dataset,fid_mean,fid_std,is_mean,is_std,cas_mean,cas_std,n_real,n_gen\n";
  csv << result.report.dataset << ',' << csv_cell(result.report.fid_value) << ','
      << csv_cell(result.fid_std) << ',' << csv_cell(result.report.is_mean) << ','
      << csv_cell(result.report.is_std) << ',' << csv_cell(result.report.cas_mean) << ','
      << csv_cell(result.report.cas_std) << ',' << result.report.n_real << ','
      << result.report.n_gen << '\n';
  return result;
}

// ------------------------------------------------------------------ plot ---

void cmd_plot(const PlotArgs& args) {
  fs::create_directories(args.out_dir);
  const TimeSeriesDataset real = load_ucr(args.real_file, Split::test);
  const TimeSeriesDataset gen = load_ucr(args.gen_file, Split::test);
  if (real.length() != gen.length())
    throw TvqError("plot: real and generated series lengths differ");
  LoadedFcn fcn = load_fcn(args.fcn_ckpt);

  const int n_real = real.n(), n_gen = gen.n();
  XMat series(n_real + n_gen, real.length());
  std::vector<std::string> sources;
  std::vector<int> labels, groups;
  for (int i = 0; i < n_real; ++i) {
    series.row(i) = (real.samples.row(i).array() - fcn.norm_mean) / fcn.norm_std;
    sources.push_back("real");
    labels.push_back(real.labels[i]);
    groups.push_back(0);
  }
  for (int i = 0; i < n_gen; ++i) {
    series.row(n_real + i) = (gen.samples.row(i).array() - fcn.norm_mean) / fcn.norm_std;
    sources.push_back("gen");
    labels.push_back(gen.labels[i]);
    groups.push_back(1);
  }
  const XMat features = fcn.model->features(series);

  TsneOptions topts;
  topts.seed = args.seed;
  topts.iterations = args.tsne_iterations;

  const auto emit = [&](const std::string& name, const XMat& coords, const std::string& title) {
    write_svg_scatter(args.out_dir + "/" + name + ".svg", coords, groups, title);
    write_coords_csv(args.out_dir + "/" + name + ".csv", coords, sources, labels);
  };
  emit("pca_series", pca(series, 2), "PCA of series (blue=real, orange=generated)");
  emit("pca_features", pca(features, 2), "PCA of classifier features");
  emit("tsne_series", tsne(series, topts), "t-SNE of series");
  emit("tsne_features", tsne(features, topts), "t-SNE of classifier features");
}

// ---------------------------------------------------------------- ablate ---

std::string cmd_ablate(const RunConfig& cfg, const CliPaths& paths, const AblateArgs& args) {
  ensure_out_dir(paths);
  const std::string csv_path = paths.out_dir + "/ablation.csv";
  std::ofstream csv(csv_path);
  csv << "variant,guidance_scale,fid,is\n";

  const auto run_variant = [&](const std::string& name, RunConfig variant) -> void {
    variant.dataset_name = cfg.dataset_name;
    CliPaths vpaths = paths;
    vpaths.out_dir = paths.out_dir + "/" + name;
    fs::create_directories(vpaths.out_dir);
    if (variant.perceptual_loss) {
      // Perceptual training needs the pretrained classifier in its out dir.
      RunConfig fcfg = variant;
      cmd_train_fcn(fcfg, vpaths);
    }
    const std::string s1 = cmd_train_stage1(variant, vpaths);
    const std::string s2 = cmd_train_stage2(variant, vpaths, s1);
    EvaluateArgs eargs;
    eargs.metrics = {"fid", "is"};
    eargs.stage1_ckpt = s1;
    eargs.stage2_ckpt = s2;
    eargs.train_fcn_now = !fs::exists(ckpt_path(vpaths, cfg.dataset_name, "fcn"));
    eargs.fcn_ckpt = ckpt_path(vpaths, cfg.dataset_name, "fcn");
    eargs.seed = args.seed;
    const EvaluateResult r = cmd_evaluate(variant, vpaths, eargs);
    csv << name << ",," << r.report.fid_value.value_or(-1) << ','
        << r.report.is_mean.value_or(-1) << '\n';
    csv.flush();
  };

  for (const std::string& v : args.variants) {
    RunConfig variant = cfg;
    if (v == "timevqvae") {
      variant.naive_vqvae = false;
      variant.band_separation = true;
      variant.perceptual_loss = false;
    } else if (v == "naive") {
      variant.naive_vqvae = true;
      variant.band_separation = false;
      variant.perceptual_loss = false;
      variant.codebook_size = 64;
      variant.lf_target_width = 8;
    } else if (v == "tf-nosep") {
      variant.naive_vqvae = false;
      variant.band_separation = false;
      variant.perceptual_loss = false;
      variant.codebook_size = 64;
      variant.lf_target_width = 8;
    } else if (v == "perceptual") {
      variant.naive_vqvae = false;
      variant.band_separation = true;
      variant.perceptual_loss = true;
    } else {
      throw ConfigError("ablate: unknown variant '" + v + "'");
    }
    run_variant(v, variant);
  }

  // Guidance sweep over the full model trained above (or now).
  if (!args.guidance_sweep.empty()) {
    CliPaths vpaths = paths;
    vpaths.out_dir = paths.out_dir + "/timevqvae";
    const std::string s1 = ckpt_path(vpaths, cfg.dataset_name, "stage1");
    const std::string s2 = ckpt_path(vpaths, cfg.dataset_name, "stage2");
    if (fs::exists(s1) && fs::exists(s2)) {
      for (double alpha : args.guidance_sweep) {
        RunConfig variant = cfg;
        variant.naive_vqvae = false;
        variant.band_separation = true;
        variant.perceptual_loss = false;
        variant.guidance_scale = alpha;
        EvaluateArgs eargs;
        eargs.metrics = {"fid", "is"};
        eargs.stage1_ckpt = s1;
        eargs.stage2_ckpt = s2;
        eargs.fcn_ckpt = ckpt_path(vpaths, cfg.dataset_name, "fcn");
        eargs.conditional = true;
        eargs.seed = args.seed;
        const EvaluateResult r = cmd_evaluate(variant, vpaths, eargs);
        csv << "guidance," << alpha << ',' << r.report.fid_value.value_or(-1) << ','
            << r.report.is_mean.value_or(-1) << '\n';
        csv.flush();
      }
    }
  }
  return csv_path;
}

}  // namespace tvq

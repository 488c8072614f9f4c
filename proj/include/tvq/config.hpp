#pragma once

#include "tvq/autoencoder.hpp"
#include "tvq/fcnmetrics.hpp"
#include "tvq/prior.hpp"
#include "tvq/sampler.hpp"

#include <json.hpp>

#include <string>

namespace tvq {

/// One run's full configuration. Parsed from a JSON file with fail-fast
/// validation: unknown keys are errors. Every field has a default, so `{}` is
/// a valid config.
struct RunConfig {
  std::string dataset_name = "SineMix";
  std::string data_dir = "data";
  bool per_series_norm = false;

  StftConfig stft;  // n_fft 8, hop 2, lf_bins 1

  std::string encdec_size = "base";  // "small" | "base"
  int lf_target_width = 8;
  int hf_target_width = 32;

  int codebook_size = 32;
  double ema_decay = 0.8;
  double beta = 1.0;
  bool use_ema = true;

  std::string prior_size = "base";  // "small" | "base"
  double p_uncond = 0.2;

  Stage1TrainOptions stage1;
  PriorTrainOptions stage2;
  FcnTrainOptions fcn;

  DecodeOptions sampler;  // iterations, temperature, greedy
  double guidance_scale = 1.0;

  int eval_runs = 3;
  int cas_runs = 5;
  int is_splits = 1;

  bool naive_vqvae = false;
  bool band_separation = true;
  bool perceptual_loss = false;
  bool hf_time_squared = true;

  std::uint64_t seed = 0;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical (sorted-key) JSON dump, as hex.
  std::string hash() const;

  Stage1Config make_stage1_config() const;
  PriorConfig make_prior_config(int n_classes) const;
  void validate() const;
};

}  // namespace tvq

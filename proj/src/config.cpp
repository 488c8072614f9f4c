#include "tvq/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace tvq {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (allowed.find(key) == allowed.end())
      throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  check_keys(j, "config",
             {"dataset", "stft", "encdec", "quantizer", "prior", "stage1", "stage2", "fcn",
              "sampler", "eval", "ablation", "seed"});

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "dataset", {"name", "data_dir", "per_series_norm"});
    get_if(d, "name", c.dataset_name);
    get_if(d, "data_dir", c.data_dir);
    get_if(d, "per_series_norm", c.per_series_norm);
  }
  if (j.contains("stft")) {
    const auto& s = j.at("stft");
    check_keys(s, "stft", {"n_fft", "hop", "lf_bins"});
    get_if(s, "n_fft", c.stft.n_fft);
    c.stft.hop = c.stft.n_fft / 4;  // default follows n_fft
    get_if(s, "hop", c.stft.hop);
    get_if(s, "lf_bins", c.stft.lf_bins);
  }
  if (j.contains("encdec")) {
    const auto& e = j.at("encdec");
    check_keys(e, "encdec", {"size", "lf_target_width", "hf_target_width"});
    get_if(e, "size", c.encdec_size);
    get_if(e, "lf_target_width", c.lf_target_width);
    get_if(e, "hf_target_width", c.hf_target_width);
  }
  if (j.contains("quantizer")) {
    const auto& q = j.at("quantizer");
    check_keys(q, "quantizer", {"K", "ema_decay", "beta", "ema"});
    get_if(q, "K", c.codebook_size);
    get_if(q, "ema_decay", c.ema_decay);
    get_if(q, "beta", c.beta);
    get_if(q, "ema", c.use_ema);
  }
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    check_keys(p, "prior", {"size", "p_uncond"});
    get_if(p, "size", c.prior_size);
    get_if(p, "p_uncond", c.p_uncond);
  }
  if (j.contains("stage1")) {
    const auto& s = j.at("stage1");
    check_keys(s, "stage1", {"epochs", "batch_size", "lr", "weight_decay"});
    get_if(s, "epochs", c.stage1.epochs);
    get_if(s, "batch_size", c.stage1.batch_size);
    get_if(s, "lr", c.stage1.lr);
    get_if(s, "weight_decay", c.stage1.weight_decay);
  }
  if (j.contains("stage2")) {
    const auto& s = j.at("stage2");
    check_keys(s, "stage2", {"epochs", "batch_size", "lr", "weight_decay", "stochastic_tokens"});
    get_if(s, "epochs", c.stage2.epochs);
    get_if(s, "batch_size", c.stage2.batch_size);
    get_if(s, "lr", c.stage2.lr);
    get_if(s, "weight_decay", c.stage2.weight_decay);
    get_if(s, "stochastic_tokens", c.stage2.stochastic_tokens);
  }
  if (j.contains("fcn")) {
    const auto& f = j.at("fcn");
    check_keys(f, "fcn", {"epochs", "batch_size", "lr", "weight_decay"});
    get_if(f, "epochs", c.fcn.epochs);
    get_if(f, "batch_size", c.fcn.batch_size);
    get_if(f, "lr", c.fcn.lr);
    get_if(f, "weight_decay", c.fcn.weight_decay);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    check_keys(s, "sampler", {"iterations", "guidance_scale", "temperature", "greedy"});
    get_if(s, "iterations", c.sampler.T);
    get_if(s, "guidance_scale", c.guidance_scale);
    get_if(s, "temperature", c.sampler.temperature0);
    get_if(s, "greedy", c.sampler.greedy);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e, "eval", {"runs", "cas_runs", "is_splits"});
    get_if(e, "runs", c.eval_runs);
    get_if(e, "cas_runs", c.cas_runs);
    get_if(e, "is_splits", c.is_splits);
  }
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    check_keys(a, "ablation",
               {"naive_vqvae", "band_separation", "perceptual_loss", "hf_time_squared"});
    get_if(a, "naive_vqvae", c.naive_vqvae);
    get_if(a, "band_separation", c.band_separation);
    get_if(a, "perceptual_loss", c.perceptual_loss);
    get_if(a, "hf_time_squared", c.hf_time_squared);
  }
  get_if(j, "seed", c.seed);
  c.stage1.seed = c.seed;
  c.stage2.seed = c.seed;
  c.fcn.seed = c.seed;
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["dataset"] = {{"name", dataset_name}, {"data_dir", data_dir}, {"per_series_norm", per_series_norm}};
  j["stft"] = {{"n_fft", stft.n_fft}, {"hop", stft.hop}, {"lf_bins", stft.lf_bins}};
  j["encdec"] = {{"size", encdec_size},
                 {"lf_target_width", lf_target_width},
                 {"hf_target_width", hf_target_width}};
  j["quantizer"] = {{"K", codebook_size}, {"ema_decay", ema_decay}, {"beta", beta}, {"ema", use_ema}};
  j["prior"] = {{"size", prior_size}, {"p_uncond", p_uncond}};
  j["stage1"] = {{"epochs", stage1.epochs},
                 {"batch_size", stage1.batch_size},
                 {"lr", stage1.lr},
                 {"weight_decay", stage1.weight_decay}};
  j["stage2"] = {{"epochs", stage2.epochs},
                 {"batch_size", stage2.batch_size},
                 {"lr", stage2.lr},
                 {"weight_decay", stage2.weight_decay},
                 {"stochastic_tokens", stage2.stochastic_tokens}};
  j["fcn"] = {{"epochs", fcn.epochs},
              {"batch_size", fcn.batch_size},
              {"lr", fcn.lr},
              {"weight_decay", fcn.weight_decay}};
  j["sampler"] = {{"iterations", sampler.T},
                  {"guidance_scale", guidance_scale},
                  {"temperature", sampler.temperature0},
                  {"greedy", sampler.greedy}};
  j["eval"] = {{"runs", eval_runs}, {"cas_runs", cas_runs}, {"is_splits", is_splits}};
  j["ablation"] = {{"naive_vqvae", naive_vqvae},
                   {"band_separation", band_separation},
                   {"perceptual_loss", perceptual_loss},
                   {"hf_time_squared", hf_time_squared}};
  j["seed"] = seed;
  return j;
}

std::string RunConfig::hash() const {
  const std::uint64_t h = fnv1a(to_json().dump());
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

Stage1Config RunConfig::make_stage1_config() const {
  Stage1Config s;
  s.stft = stft;
  const int kernel_h = naive_vqvae ? 1 : 3;
  const int in_ch = naive_vqvae ? 1 : 2;
  if (encdec_size == "small") {
    s.lf = EncDecConfig::small(lf_target_width, in_ch, kernel_h);
    s.hf = EncDecConfig::small(hf_target_width, in_ch, kernel_h);
  } else if (encdec_size == "base") {
    s.lf = EncDecConfig::base(lf_target_width, in_ch, kernel_h);
    s.hf = EncDecConfig::base(hf_target_width, in_ch, kernel_h);
  } else {
    throw ConfigError("config: encdec.size must be 'small' or 'base'");
  }
  s.codebook_size = codebook_size;
  s.ema_decay = ema_decay;
  s.beta = beta;
  s.use_ema = use_ema;
  s.band_separation = band_separation && !naive_vqvae;
  s.naive_time = naive_vqvae;
  s.hf_time_squared = hf_time_squared;
  s.perceptual = perceptual_loss;
  return s;
}

PriorConfig RunConfig::make_prior_config(int n_classes) const {
  PriorConfig p;
  if (prior_size == "small")
    p = PriorConfig::small(codebook_size, n_classes);
  else if (prior_size == "base")
    p = PriorConfig::base(codebook_size, n_classes);
  else
    throw ConfigError("config: prior.size must be 'small' or 'base'");
  p.p_uncond = p_uncond;
  return p;
}

void RunConfig::validate() const {
  stft.validate();
  if (naive_vqvae && band_separation)
    throw ConfigError("config: naive_vqvae requires ablation.band_separation=false");
  if (guidance_scale < 0.0) throw ConfigError("config: guidance_scale must be >= 0");
  if (eval_runs < 1 || cas_runs < 1) throw ConfigError("config: eval runs must be >= 1");
  if (stage1.epochs < 0 || stage2.epochs < 0 || fcn.epochs < 0)
    throw ConfigError("config: epochs must be >= 0");
}

}  // namespace tvq

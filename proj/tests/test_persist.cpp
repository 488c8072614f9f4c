#include "tvq/checkpoint.hpp"
#include "tvq/config.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace tvq;

namespace {

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("checkpoint save/load/save is byte-identical") {
  const std::string dir = test::scratch_dir("ckpt_rt");
  Rng rng(501);
  Checkpoint c;
  c.stage = 1;
  c.meta = {{"config_hash", "abc123"}, {"note", "round trip"}, {"epoch", 7}};
  c.tensors.emplace_back("a.W", test::random_matrix(3, 5, rng));
  c.tensors.emplace_back("a.b", test::random_matrix(3, 1, rng));

  const std::string p1 = dir + "/one.ckpt";
  const std::string p2 = dir + "/two.ckpt";
  save_checkpoint(p1, c);
  const Checkpoint back = load_checkpoint(p1);
  CHECK(back.stage == 1);
  CHECK(back.meta.at("config_hash") == "abc123");
  CHECK((back.tensor("a.W") - c.tensors[0].second).cwiseAbs().maxCoeff() == 0.0);
  save_checkpoint(p2, back);
  CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("checkpoint rejects bad magic and missing tensors") {
  const std::string dir = test::scratch_dir("ckpt_bad");
  {
    std::ofstream out(dir + "/junk.ckpt", std::ios::binary);
    out << "NOTACKPTFILE";
  }
  CHECK_THROWS_AS(load_checkpoint(dir + "/junk.ckpt"), ConfigError);

  Checkpoint c;
  c.stage = 1;
  CHECK_THROWS_AS(c.tensor("missing"), TvqError);
}

TEST_CASE("registry restore round trip and shape guard") {
  Rng rng(503);
  XMat w = test::random_matrix(2, 3, rng), gw = XMat::Zero(2, 3);
  XMat buf = test::random_matrix(2, 1, rng);
  nn::Registry reg;
  reg.add("w", &w, &gw);
  reg.add_buffer("buf", &buf);
  const auto snap = snapshot_registry(reg);

  w.setZero();
  buf.setZero();
  restore_registry(reg, snap);
  CHECK((w - snap[0].second).cwiseAbs().maxCoeff() == 0.0);
  CHECK((buf - snap[1].second).cwiseAbs().maxCoeff() == 0.0);

  nn::Registry other;
  XMat wrong = XMat::Zero(3, 3), gwrong = XMat::Zero(3, 3);
  other.add("w", &wrong, &gwrong);
  CHECK_THROWS_AS(restore_registry(other, snap), ConfigError);
}

TEST_CASE("optimizer state survives a checkpoint") {
  Rng rng(509);
  XMat w = test::random_matrix(2, 2, rng), g = test::random_matrix(2, 2, rng);
  nn::AdamW opt({{"w", &w, &g}}, 1e-5);
  opt.step(1e-3);
  opt.step(1e-3);

  Checkpoint c;
  c.stage = 1;
  append_optimizer_state(c, opt);

  XMat w2 = w, g2 = g;
  nn::AdamW fresh({{"w", &w2, &g2}}, 1e-5);
  CHECK(restore_optimizer_state(c, fresh));
  CHECK(fresh.t == opt.t);
  CHECK((fresh.m[0] - opt.m[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fresh.v[0] - opt.v[0]).cwiseAbs().maxCoeff() == 0.0);

  Checkpoint empty;
  CHECK_FALSE(restore_optimizer_state(empty, fresh));
}

TEST_CASE("config parses defaults, rejects unknown keys") {
  const RunConfig defaults = RunConfig::from_json(nlohmann::json::object());
  CHECK(defaults.stft.n_fft == 8);
  CHECK(defaults.codebook_size == 32);
  CHECK(defaults.stage1.epochs == 2000);
  CHECK(defaults.stage2.epochs == 10000);
  CHECK(defaults.fcn.epochs == 1000);
  CHECK(defaults.sampler.T == 10);
  CHECK(defaults.p_uncond == 0.2);
  CHECK(defaults.ema_decay == 0.8);

  CHECK_THROWS_AS(RunConfig::from_json({{"typo_key", 1}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"stft", {{"nfft", 8}}}}), ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json({{"ablation", {{"naive_vqvae", true}, {"band_separation", true}}}}),
      ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
  RunConfig a;
  RunConfig b;
  CHECK(a.hash() == b.hash());
  b.codebook_size = 64;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("config file round trip") {
  const std::string dir = test::scratch_dir("cfg_rt");
  RunConfig a;
  a.dataset_name = "EcgLike";
  a.codebook_size = 16;
  a.stage1.epochs = 42;
  {
    std::ofstream out(dir + "/run.json");
    out << a.to_json().dump(2);
  }
  const RunConfig b = RunConfig::load(dir + "/run.json");
  CHECK(b.dataset_name == "EcgLike");
  CHECK(b.codebook_size == 16);
  CHECK(b.stage1.epochs == 42);
  CHECK(a.hash() == b.hash());
}

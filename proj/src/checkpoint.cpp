#include "tvq/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tvq {

namespace {

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw TvqError("checkpoint: truncated file");
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const auto len = read_pod<std::uint64_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw TvqError("checkpoint: truncated file");
  return s;
}

}  // namespace

const XMat& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw TvqError("checkpoint: missing tensor " + name);
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TvqError("checkpoint: cannot write " + path);
  out.write(Checkpoint::kMagic, sizeof(Checkpoint::kMagic));
  write_pod<std::uint32_t>(out, Checkpoint::kVersion);
  write_pod<std::uint32_t>(out, c.stage);
  write_string(out, c.meta.dump());
  write_pod<std::uint64_t>(out, c.tensors.size());
  for (const auto& [name, t] : c.tensors) {
    write_string(out, name);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.size()));
  }
  if (!out) throw TvqError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TvqError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, Checkpoint::kMagic, sizeof(magic)) != 0)
    throw ConfigError("checkpoint: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(in);
  if (version != Checkpoint::kVersion)
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.stage = read_pod<std::uint32_t>(in);
  try {
    c.meta = nlohmann::json::parse(read_string(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  const auto n = read_pod<std::uint64_t>(in);
  c.tensors.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = read_string(in);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    XMat t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
    if (!in) throw TvqError("checkpoint: truncated tensor " + name);
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  return c;
}

std::vector<std::pair<std::string, XMat>> snapshot_registry(const nn::Registry& r) {
  std::vector<std::pair<std::string, XMat>> out;
  out.reserve(r.params.size() + r.buffers.size());
  for (const auto& p : r.params) out.emplace_back(p.name, *p.value);
  for (const auto& b : r.buffers) out.emplace_back(b.name, *b.value);
  return out;
}

void restore_registry(nn::Registry& r, const std::vector<std::pair<std::string, XMat>>& tensors) {
  auto find = [&tensors](const std::string& name) -> const XMat* {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  };
  auto restore = [&](const std::string& name, XMat* dst) {
    const XMat* src = find(name);
    if (src == nullptr) throw ConfigError("checkpoint: missing tensor " + name);
    if (src->rows() != dst->rows() || src->cols() != dst->cols())
      throw ConfigError("checkpoint: shape mismatch for " + name);
    *dst = *src;
  };
  for (auto& p : r.params) restore(p.name, p.value);
  for (auto& b : r.buffers) restore(b.name, b.value);
}

void append_optimizer_state(Checkpoint& c, const nn::AdamW& opt) {
  c.meta["adam_t"] = opt.t;
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    c.tensors.emplace_back("adam.m." + opt.params()[i].name, opt.m[i]);
    c.tensors.emplace_back("adam.v." + opt.params()[i].name, opt.v[i]);
  }
}

bool restore_optimizer_state(const Checkpoint& c, nn::AdamW& opt) {
  if (!c.meta.contains("adam_t")) return false;
  nn::AdamW& o = opt;
  o.t = c.meta["adam_t"].get<long long>();
  for (std::size_t i = 0; i < o.params().size(); ++i) {
    o.m[i] = c.tensor("adam.m." + o.params()[i].name);
    o.v[i] = c.tensor("adam.v." + o.params()[i].name);
  }
  return true;
}

}  // namespace tvq

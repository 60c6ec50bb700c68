#include "hgmts/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hgmts/error.hpp"

namespace hgmts {

namespace {

constexpr char kMagic[8] = {'H', 'G', 'M', 'T', 'S', 'C', 'K', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("truncated checkpoint " + path.string());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& in, const std::filesystem::path& path, std::uint64_t limit) {
  const std::uint64_t len = get_u64(in, path);
  if (len > limit) throw ParseError("implausible string length in checkpoint " + path.string());
  std::string s(len, '\0');
  if (len && !in.read(s.data(), static_cast<std::streamsize>(len))) {
    throw ParseError("truncated checkpoint " + path.string());
  }
  return s;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params, const std::string& config_text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, fnv1a64(config_text));
  put_u64(out, config_text.size());
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  put_u64(out, params.size());
  for (const Parameter& p : params.all()) {
    put_u64(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u64(out, p.tensor.rank());
    for (std::size_t d : p.tensor.shape()) put_u64(out, d);
    for (double v : p.tensor.values()) put_f64(out, v);
  }
  if (!out) throw ParseError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ParseError("not a checkpoint file: " + path.string());
  }
  Checkpoint ckpt;
  ckpt.config_hash = get_u64(in, path);
  ckpt.config_text = get_string(in, path, 1u << 24);
  const std::uint64_t count = get_u64(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    Parameter p;
    p.name = get_string(in, path, 4096);
    const std::uint64_t rank = get_u64(in, path);
    if (rank > 8) throw ParseError("implausible tensor rank in checkpoint " + path.string());
    Shape shape(rank);
    for (auto& d : shape) d = get_u64(in, path);
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = std::bit_cast<double>(get_u64(in, path));
    p.tensor = Tensor(std::move(shape), std::move(values));
    ckpt.params.push_back(std::move(p));
  }
  if (fnv1a64(ckpt.config_text) != ckpt.config_hash) {
    throw ParseError("checkpoint config hash does not match its embedded config: " + path.string());
  }
  return ckpt;
}

void load_parameters(const Checkpoint& ckpt, ParameterStore& params, const std::string& config_text) {
  if (fnv1a64(config_text) != ckpt.config_hash) {
    throw ConfigError("checkpoint was written for a different model configuration");
  }
  for (Parameter& p : params.all()) {
    const Parameter* src = nullptr;
    for (const Parameter& candidate : ckpt.params)
      if (candidate.name == p.name) src = &candidate;
    if (!src) throw ParseError("checkpoint is missing parameter '" + p.name + "'");
    if (src->tensor.shape() != p.tensor.shape()) {
      throw DimensionError("checkpoint shape " + shape_string(src->tensor.shape()) + " for '" + p.name +
                           "' does not match model shape " + shape_string(p.tensor.shape()));
    }
    std::copy(src->tensor.values().begin(), src->tensor.values().end(), p.tensor.values().begin());
  }
}

}  // namespace hgmts

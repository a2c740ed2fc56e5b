#include "gravis/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "gravis/errors.hpp"

namespace gravis {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'V', 'S'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw CorruptCheckpoint(path + ": truncated header field");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw CorruptCheckpoint(path + ": truncated header field");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::vector<NamedTensor>& tensors,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    std::uint64_t numel = 1;
    for (std::uint64_t d : t.dims) numel *= d;
    if (numel != t.values.size())
      throw ShapeMismatch("tensor " + t.name + " dims do not match value count");
    write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) write_u64(out, d);
    for (float v : t.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      write_u32(out, bits);
    }
  }
  if (!out) throw IoFailure("short write to " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw CorruptCheckpoint(path + ": bad magic '" +
                            std::string(magic, magic + 4) + "', expected 'GRVS'");
  const std::uint32_t version = read_u32(in, path);
  if (version != kCheckpointVersion)
    throw VersionMismatch(path + ": format version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));
  const std::uint32_t count = read_u32(in, path);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    const std::uint32_t name_len = read_u32(in, path);
    if (name_len > 4096) throw CorruptCheckpoint(path + ": absurd tensor name length");
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len))
      throw CorruptCheckpoint(path + ": truncated tensor name");
    const std::uint32_t rank = read_u32(in, path);
    if (rank > 8) throw CorruptCheckpoint(path + ": absurd tensor rank");
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims.push_back(read_u64(in, path));
      numel *= t.dims.back();
    }
    if (numel > (1ULL << 32))
      throw CorruptCheckpoint(path + ": absurd tensor size");
    t.values.resize(numel);
    for (std::uint64_t i = 0; i < numel; ++i) {
      unsigned char b[4];
      in.read(reinterpret_cast<char*>(b), 4);
      if (in.gcount() != 4)
        throw CorruptCheckpoint(path + ": truncated tensor '" + t.name + "'");
      std::uint32_t bits = 0;
      for (int j = 0; j < 4; ++j) bits |= static_cast<std::uint32_t>(b[j]) << (8 * j);
      std::memcpy(&t.values[i], &bits, 4);
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

std::vector<NamedTensor> encoder_state_to_tensors(
    const EncoderParams<float>& params, const OptimizerState<float>& state) {
  std::vector<NamedTensor> out;
  const std::vector<std::string> names = params.tensor_names();

  auto scalar = [](const std::string& name, float v) {
    return NamedTensor{name, {1}, {v}};
  };
  out.push_back(scalar("config/input_size", static_cast<float>(params.config.input_size)));
  out.push_back(scalar("config/in_channels", static_cast<float>(params.config.in_channels)));
  NamedTensor stages{"config/stage_channels",
                     {params.config.stage_channels.size()},
                     {}};
  for (int c : params.config.stage_channels)
    stages.values.push_back(static_cast<float>(c));
  out.push_back(std::move(stages));
  out.push_back(scalar("config/hidden_dim", static_cast<float>(params.config.hidden_dim)));
  out.push_back(scalar("config/embed_dim", static_cast<float>(params.config.embed_dim)));

  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    NamedTensor nt;
    nt.name = "param/" + names[t];
    for (std::size_t d : params.tensors[t].dims) nt.dims.push_back(d);
    nt.values = params.tensors[t].data;
    out.push_back(std::move(nt));
  }
  for (std::size_t t = 0; t < state.velocity.size(); ++t) {
    NamedTensor nt;
    nt.name = "velocity/" + names[t];
    for (std::size_t d : state.velocity[t].dims) nt.dims.push_back(d);
    nt.values = state.velocity[t].data;
    out.push_back(std::move(nt));
  }
  out.push_back(scalar("opt/momentum", static_cast<float>(state.momentum)));
  out.push_back(scalar("opt/base_lr", static_cast<float>(state.base_lr)));
  out.push_back(scalar("opt/epoch_horizon", static_cast<float>(state.epoch_horizon)));
  out.push_back(scalar("opt/lr_min", static_cast<float>(state.lr_min)));
  return out;
}

EncoderSnapshot encoder_state_from_tensors(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& t : tensors) by_name[t.name] = &t;

  auto require = [&](const std::string& name) -> const NamedTensor& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw CorruptCheckpoint("missing tensor '" + name + "'");
    return *it->second;
  };
  auto scalar = [&](const std::string& name) {
    const NamedTensor& t = require(name);
    if (t.values.size() != 1)
      throw CorruptCheckpoint("tensor '" + name + "' is not a scalar");
    return t.values[0];
  };

  EncoderConfig cfg;
  cfg.input_size = static_cast<int>(scalar("config/input_size"));
  cfg.in_channels = static_cast<int>(scalar("config/in_channels"));
  cfg.stage_channels.clear();
  for (float v : require("config/stage_channels").values)
    cfg.stage_channels.push_back(static_cast<int>(v));
  cfg.hidden_dim = static_cast<int>(scalar("config/hidden_dim"));
  cfg.embed_dim = static_cast<int>(scalar("config/embed_dim"));

  EncoderSnapshot snap;
  snap.params = init_encoder_params<float>(cfg, 0);
  snap.state = init_optimizer_state(snap.params, scalar("opt/momentum"),
                                    scalar("opt/base_lr"),
                                    static_cast<int>(scalar("opt/epoch_horizon")));
  snap.state.lr_min = scalar("opt/lr_min");

  const std::vector<std::string> names = snap.params.tensor_names();
  for (std::size_t t = 0; t < names.size(); ++t) {
    const NamedTensor& p = require("param/" + names[t]);
    const NamedTensor& v = require("velocity/" + names[t]);
    if (p.values.size() != snap.params.tensors[t].numel() ||
        v.values.size() != snap.state.velocity[t].numel())
      throw CorruptCheckpoint("tensor '" + names[t] +
                              "' disagrees with the stored encoder shape");
    snap.params.tensors[t].data = p.values;
    snap.state.velocity[t].data = v.values;
  }
  return snap;
}

}  // namespace gravis

#include "floodtile/serialize.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace floodtile {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'C', 'K'};
constexpr uint16_t kVersion = 1;

// The on-disk format is little-endian; all supported targets are.
static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
  put<uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
}

std::vector<float> get_floats(std::istream& in) {
  auto n = get<uint64_t>(in);
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(float)));
  if (!in) throw std::runtime_error("checkpoint: truncated tensor payload");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const UNet& model, const Adam* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

  out.write(kMagic, 4);
  put(out, kVersion);
  const auto& cfg = model.config();
  put<uint32_t>(out, cfg.depth);
  put<uint32_t>(out, cfg.width);
  put<uint32_t>(out, cfg.in_channels);
  put<uint32_t>(out, cfg.out_channels);

  auto params = model.params();
  put<uint32_t>(out, uint32_t(params.size()));
  for (const auto* p : params) {
    put<uint32_t>(out, uint32_t(p->name.size()));
    out.write(p->name.data(), std::streamsize(p->name.size()));
    put<uint8_t>(out, p->running_stat ? 1 : 0);
    put<uint32_t>(out, uint32_t(p->shape.size()));
    for (int d : p->shape) put<uint32_t>(out, uint32_t(d));
    put_floats(out, p->flat());
  }

  put<uint8_t>(out, optimizer ? 1 : 0);
  if (optimizer) {
    const auto& oc = optimizer->config();
    put<double>(out, oc.lr);
    put<double>(out, oc.beta1);
    put<double>(out, oc.beta2);
    put<double>(out, oc.eps);
    auto st = optimizer->state();
    put<int64_t>(out, st.step_count);
    put<uint32_t>(out, uint32_t(st.m.size()));
    for (size_t i = 0; i < st.m.size(); ++i) {
      put_floats(out, st.m[i]);
      put_floats(out, st.v[i]);
    }
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  if (get<uint16_t>(in) != kVersion)
    throw std::runtime_error("checkpoint: unsupported format version in " + path);

  UNetConfig cfg;
  cfg.depth = int(get<uint32_t>(in));
  cfg.width = int(get<uint32_t>(in));
  cfg.in_channels = int(get<uint32_t>(in));
  cfg.out_channels = int(get<uint32_t>(in));

  LoadedCheckpoint lc;
  lc.model = std::make_unique<UNet>(cfg, 0);
  auto params = lc.model->params();
  auto n = get<uint32_t>(in);
  if (n != params.size()) throw std::runtime_error("checkpoint: parameter list mismatch");
  for (auto* p : params) {
    auto name_len = get<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (name != p->name) throw std::runtime_error("checkpoint: unexpected tensor '" + name + "'");
    bool rs = get<uint8_t>(in) != 0;
    if (rs != p->running_stat) throw std::runtime_error("checkpoint: tensor kind mismatch");
    auto ndim = get<uint32_t>(in);
    if (ndim != p->shape.size()) throw std::runtime_error("checkpoint: tensor rank mismatch");
    for (int d : p->shape)
      if (get<uint32_t>(in) != uint32_t(d))
        throw std::runtime_error("checkpoint: tensor shape mismatch for '" + name + "'");
    auto vals = get_floats(in);
    if (vals.size() != p->flat().size())
      throw std::runtime_error("checkpoint: tensor size mismatch for '" + name + "'");
    p->flat() = std::move(vals);
  }

  lc.has_optimizer = get<uint8_t>(in) != 0;
  if (lc.has_optimizer) {
    lc.adam_config.lr = get<double>(in);
    lc.adam_config.beta1 = get<double>(in);
    lc.adam_config.beta2 = get<double>(in);
    lc.adam_config.eps = get<double>(in);
    lc.adam_state.step_count = long(get<int64_t>(in));
    auto m = get<uint32_t>(in);
    lc.adam_state.m.resize(m);
    lc.adam_state.v.resize(m);
    for (uint32_t i = 0; i < m; ++i) {
      lc.adam_state.m[i] = get_floats(in);
      lc.adam_state.v[i] = get_floats(in);
    }
  }
  return lc;
}

}  // namespace floodtile

#include "ma2/checkpoint_io.hpp"

#include "ma2/serial.hpp"

namespace ma2 {

namespace {

constexpr char kMagic[4] = {'M', 'A', '2', 'W'};
constexpr std::uint8_t kVersion = 1;

void write_params(BinaryWriter& w, const Params& params) {
  w.u32(static_cast<std::uint32_t>(params.weights.size()));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    w.u32(static_cast<std::uint32_t>(params.weights[l].rows()));
    w.u32(static_cast<std::uint32_t>(params.weights[l].cols()));
    w.f32_block(params.weights[l]);
    w.f32_block(params.biases[l]);
  }
}

Params read_params(BinaryReader& r) {
  Params params;
  const std::uint32_t n_layers = r.u32();
  params.weights.resize(n_layers);
  params.biases.resize(n_layers);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    params.weights[l].resize(rows, cols);
    params.biases[l].resize(rows);
    r.f32_block(params.weights[l]);
    r.f32_block(params.biases[l]);
  }
  return params;
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  BinaryWriter w(path);
  w.bytes(kMagic, 4);
  w.u8(kVersion);
  w.u64(ckpt.scene_hash);
  w.u64(ckpt.dataset_hash);

  w.u8(static_cast<std::uint8_t>(ckpt.variant.kind));
  w.u32(static_cast<std::uint32_t>(ckpt.variant.obs_history));
  w.u32(static_cast<std::uint32_t>(ckpt.variant.pred_horizon));
  w.u32(static_cast<std::uint32_t>(ckpt.variant.exec_horizon));
  w.u8(ckpt.variant.append_past_actions ? 1 : 0);

  w.u32(static_cast<std::uint32_t>(ckpt.net.layer_widths.size()));
  for (int width : ckpt.net.layer_widths) {
    w.u32(static_cast<std::uint32_t>(width));
  }
  w.u8(static_cast<std::uint8_t>(ckpt.net.activation));
  w.u32(static_cast<std::uint32_t>(ckpt.net.timestep_embed_dim));

  w.u8(static_cast<std::uint8_t>(ckpt.sampler.kind));
  w.u32(static_cast<std::uint32_t>(ckpt.sampler.train_steps));
  w.u32(static_cast<std::uint32_t>(ckpt.sampler.sample_steps));

  w.f64(ckpt.field.sigma);
  w.f64(ckpt.field.floor);
  w.u32(static_cast<std::uint32_t>(ckpt.field.stride));

  for (int i = 0; i < 3; ++i) w.f64(ckpt.norm.lo[i]);
  for (int i = 0; i < 3; ++i) w.f64(ckpt.norm.hi[i]);

  w.u32(static_cast<std::uint32_t>(ckpt.image_width));
  w.u32(static_cast<std::uint32_t>(ckpt.image_height));

  write_params(w, ckpt.params);
  write_params(w, ckpt.opt.m);
  write_params(w, ckpt.opt.v);
  w.u64(static_cast<std::uint64_t>(ckpt.opt.step));
  w.close();
}

Checkpoint read_checkpoint(const std::string& path) {
  BinaryReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw SerialError("not a checkpoint file: " + path);
  }
  if (r.u8() != kVersion) throw SerialError("unsupported checkpoint version");

  Checkpoint ckpt;
  ckpt.scene_hash = r.u64();
  ckpt.dataset_hash = r.u64();

  ckpt.variant.kind = static_cast<VariantKind>(r.u8());
  ckpt.variant.obs_history = static_cast<int>(r.u32());
  ckpt.variant.pred_horizon = static_cast<int>(r.u32());
  ckpt.variant.exec_horizon = static_cast<int>(r.u32());
  ckpt.variant.append_past_actions = r.u8() != 0;
  ckpt.variant.validate();

  ckpt.net.layer_widths.resize(r.u32());
  for (int& width : ckpt.net.layer_widths) {
    width = static_cast<int>(r.u32());
  }
  ckpt.net.activation = static_cast<Activation>(r.u8());
  ckpt.net.timestep_embed_dim = static_cast<int>(r.u32());
  ckpt.net.validate();

  ckpt.sampler.kind = static_cast<SamplerKind>(r.u8());
  ckpt.sampler.train_steps = static_cast<int>(r.u32());
  ckpt.sampler.sample_steps = static_cast<int>(r.u32());
  ckpt.sampler.validate();

  ckpt.field.sigma = r.f64();
  ckpt.field.floor = r.f64();
  ckpt.field.stride = static_cast<int>(r.u32());
  ckpt.field.validate();

  for (int i = 0; i < 3; ++i) ckpt.norm.lo[i] = r.f64();
  for (int i = 0; i < 3; ++i) ckpt.norm.hi[i] = r.f64();

  ckpt.image_width = static_cast<int>(r.u32());
  ckpt.image_height = static_cast<int>(r.u32());

  ckpt.params = read_params(r);
  ckpt.opt.m = read_params(r);
  ckpt.opt.v = read_params(r);
  ckpt.opt.step = static_cast<long>(r.u64());
  return ckpt;
}

}  // namespace ma2

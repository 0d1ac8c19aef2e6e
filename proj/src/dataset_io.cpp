#include "ma2/dataset_io.hpp"

#include "ma2/serial.hpp"

namespace ma2 {

namespace {
constexpr char kMagic[4] = {'M', 'A', '2', 'D'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

void write_dataset(const Dataset& dataset, const std::string& path) {
  BinaryWriter w(path);
  w.bytes(kMagic, 4);
  w.u8(kVersion);
  w.u64(dataset.scene_hash);
  w.str(dataset.task);
  w.u32(static_cast<std::uint32_t>(dataset.height));
  w.u32(static_cast<std::uint32_t>(dataset.width));
  w.u32(static_cast<std::uint32_t>(dataset.demos.size()));
  for (const auto& demo : dataset.demos) {
    if (demo.observations.size() != demo.actions.size() ||
        demo.trace.size() != demo.observations.size()) {
      throw SerialError("write_dataset: inconsistent demonstration lengths");
    }
    w.u32(static_cast<std::uint32_t>(demo.observations.size()));
    for (std::size_t t = 0; t < demo.observations.size(); ++t) {
      const Observation& obs = demo.observations[t];
      if (obs.global.rows() != dataset.height ||
          obs.global.cols() != dataset.width ||
          obs.aux.rows() != dataset.height || obs.aux.cols() != dataset.width) {
        throw SerialError("write_dataset: image dims do not match header");
      }
      w.f32_block(obs.global);
      w.f32_block(obs.aux);
      w.f32_block(obs.ee);
      w.f32_block(demo.actions[t]);
    }
  }
  w.close();
}

Dataset read_dataset(const std::string& path) {
  BinaryReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw SerialError("not a dataset file: " + path);
  }
  if (r.u8() != kVersion) throw SerialError("unsupported dataset version");
  Dataset dataset;
  dataset.scene_hash = r.u64();
  dataset.task = r.str();
  dataset.height = static_cast<int>(r.u32());
  dataset.width = static_cast<int>(r.u32());
  const std::uint32_t n_demos = r.u32();
  dataset.demos.resize(n_demos);
  for (auto& demo : dataset.demos) {
    const std::uint32_t T = r.u32();
    demo.observations.resize(T);
    demo.actions.resize(T);
    for (std::uint32_t t = 0; t < T; ++t) {
      Observation& obs = demo.observations[t];
      obs.global.resize(dataset.height, dataset.width);
      obs.aux.resize(dataset.height, dataset.width);
      r.f32_block(obs.global);
      r.f32_block(obs.aux);
      r.f32_block(obs.ee);
      r.f32_block(demo.actions[t]);
      demo.trace.append(t, obs.ee);
    }
  }
  return dataset;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SerialError("cannot open for hashing: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace ma2

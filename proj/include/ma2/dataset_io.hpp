#pragma once

#include <string>
#include <vector>

#include "ma2/simenv.hpp"

namespace ma2 {

// On-disk demonstration corpus: magic "MA2D", version byte, scene hash,
// task name, image dims, then per-demo little-endian float32 blocks
// (global image, aux image, ee, action per step). Bit-exact across
// platforms.
struct Dataset {
  std::uint64_t scene_hash = 0;
  std::string task;
  int width = 0, height = 0;
  std::vector<Demonstration> demos;
};

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace ma2

#pragma once

#include <string>

#include "ma2/policy.hpp"

namespace ma2 {

// On-disk policy weights: magic "MA2W", version byte, variant / net /
// sampler / field / normalization metadata, then little-endian float32
// parameter blocks plus optimizer moments and the step counter.
void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace ma2

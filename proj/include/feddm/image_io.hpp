#pragma once

#include <string>
#include <vector>

#include "feddm/distillation.hpp"

namespace feddm {

// Writes one PGM (1-channel) or PPM (3-channel) file per synthetic example
// into `dir`, named {client}_{class}_{idx}. Values are clamped to [0,1].
// 1-D or 2-D example shapes are written as single-row grayscale images.
void dump_synthetic_images(const std::vector<SyntheticSet>& sets, const std::string& dir);

}  // namespace feddm

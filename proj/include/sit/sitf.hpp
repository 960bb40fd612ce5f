#pragma once

#include <string>

#include "sit/backbone.hpp"

namespace sit {

// SITF feature file, bit-exact layout:
//   magic "SITF" | u8 version = 1 | u8 ndim = 3 |
//   3 x u32 little-endian extents (H_b, W_b, C_b) |
//   H_b*W_b*C_b little-endian f32 values, row-major (h, w, c).
// Values are widened to f64 on load; save narrows to f32, so maps written by
// this engine always carry f32-representable payloads.

void save_feature_map(const FeatureMap& fm, const std::string& path);

FeatureMap load_feature_map(const std::string& path);

// Shape-checked variant used by PrecomputedLoader and the dataset reader.
FeatureMap load_feature_map(const std::string& path, const FeatureShape& expected);

} // namespace sit

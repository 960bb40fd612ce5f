#pragma once

#include <string>

#include "sit/model.hpp"

namespace sit {

// SITM model container, bit-exact layout:
//   magic "SITM" | u8 version = 1 | u8 variant (0 baseline, 1 no-transformer,
//   2 no-gmp, 3 full) | u32 LE tensor count | per tensor:
//     u32 LE name length | name bytes | u8 ndim | ndim x u32 LE extents |
//     row-major little-endian f64 payload.
// Tensors appear in the model's canonical parameter order; payloads are
// written raw, so save/load round-trips bitwise.

void save_model(SITModel& model, const std::string& path);

SITModel load_model(const std::string& path);

} // namespace sit

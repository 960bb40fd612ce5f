#pragma once

namespace sit {

inline constexpr const char* kEngineVersion = "0.1.0";

// Forward-pass mode. Train enables dropout masks; Eval is deterministic.
enum class Mode { kTrain, kEval };

} // namespace sit

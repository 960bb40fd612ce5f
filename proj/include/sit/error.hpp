#pragma once

#include <stdexcept>
#include <string>

namespace sit {

// Base class for all engine errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor / operation contract violations.
struct ShapeMismatch : Error { using Error::Error; };
struct InvalidKernel : Error { using Error::Error; };
struct InvalidRate : Error { using Error::Error; };
struct NonDeterministicLayer : Error { using Error::Error; };
struct BadDimensions : Error { using Error::Error; };

// Binary file formats.
struct BadMagic : Error { using Error::Error; };
struct UnsupportedVersion : Error { using Error::Error; };
struct TruncatedPayload : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };
struct UnknownTensorName : Error { using Error::Error; };
struct MissingTensor : Error { using Error::Error; };

// Training / metrics.
struct LengthMismatch : Error { using Error::Error; };
struct EmptyBatch : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct DivergenceDetected : Error { using Error::Error; };
struct DegenerateVariance : Error { using Error::Error; };
struct ConfigParseError : Error { using Error::Error; };

} // namespace sit

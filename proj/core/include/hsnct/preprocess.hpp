#pragma once

#include <cstddef>

#include "hsnct/arrays.hpp"
#include "hsnct/geometry.hpp"

namespace hsnct {

struct NormalizationOptions {
    double count_floor = 0.5;    // applied to numerator and denominator
    bool clamp_negative = true;  // NMF needs p >= 0; disable for DHR-only runs
};

/// Wavelength in meters for a flight time `dt` in seconds.
double tof_to_wavelength(const ToFConverter& converter, double dt);

/// p = -log(max(y, floor) / max(y^o, floor)), optionally clamped at zero.
HyperspectralSinogram normalize(const RawScan& scan, const NormalizationOptions& opts = {});

/// Averages `factor` adjacent bins; ToF edges are subsampled to match.
HyperspectralSinogram spectral_rebin(const HyperspectralSinogram& sinogram, std::size_t factor);

}  // namespace hsnct

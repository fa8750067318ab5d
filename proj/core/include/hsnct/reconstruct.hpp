#pragma once

#include <cstddef>
#include <span>

#include "hsnct/arrays.hpp"
#include "hsnct/fbp.hpp"
#include "hsnct/mbir.hpp"

namespace hsnct {

enum class ReconEngine {
    Fbp,
    Mbir,
};

/// How MBIR noise weights are formed for each (slice, channel) problem.
enum class StackWeighting {
    /// exp(-s) from the channel's own sinogram s.
    PerChannelTransmission,
    /// exp(-sum_c s_c) shared by all channels. For a subspace sinogram whose
    /// basis columns have unit mean this is exp(-mean spectral attenuation).
    SharedTransmission,
    Uniform,
};

struct ReconOptions {
    ReconEngine engine = ReconEngine::Fbp;
    FbpFilter filter = FbpFilter::Ramp;
    MbirOptions mbir{};  // noise_weights is ignored; see `weighting`
    StackWeighting weighting = StackWeighting::PerChannelTransmission;
    int threads = 1;
};

struct ReconStats {
    std::size_t reconstructions = 0;
    std::size_t mbir_iterations = 0;
};

/// Reconstructs every (channel, detector row) pair independently.
///
/// `data` is channel-interleaved [view][row][col][channel]; detector row r
/// becomes volume slice r. Output is bit-identical for any thread count.
VolumeStack reconstruct_stack(std::span<const float> data, std::size_t channels, const ScanGeometry& geometry,
                              const ReconOptions& opts, ReconStats* stats = nullptr);

VolumeStack reconstruct_stack(const HyperspectralSinogram& sinogram, const ReconOptions& opts,
                              ReconStats* stats = nullptr);
VolumeStack reconstruct_stack(const SubspaceSinogram& sinogram, const ReconOptions& opts,
                              ReconStats* stats = nullptr);

}  // namespace hsnct

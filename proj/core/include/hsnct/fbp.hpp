#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "hsnct/projector.hpp"

namespace hsnct {

enum class FbpFilter {
    Ramp,
    SheppLogan,  // ramp times sinc window
};

/// Filtered back projection with a cached projector and filter spectrum.
///
/// Each view is zero-padded to the next power of two >= 2 * bins, multiplied
/// by the transform of the band-limited spatial ramp kernel, back projected
/// and scaled by pi / num_angles. Safe to call concurrently.
class FbpReconstructor {
public:
    FbpReconstructor(SliceGeometry geometry, FbpFilter filter);
    ~FbpReconstructor();
    FbpReconstructor(const FbpReconstructor&) = delete;
    FbpReconstructor& operator=(const FbpReconstructor&) = delete;

    const SliceGeometry& geometry() const noexcept { return projector_.geometry(); }
    std::size_t padded_length() const noexcept { return padded_; }

    std::vector<double> reconstruct(std::span<const double> sinogram) const;
    /// Ramp-filtered views, before back projection.
    std::vector<double> filter(std::span<const double> sinogram) const;

private:
    struct Plans;

    ParallelBeamProjector projector_;
    std::size_t padded_;
    std::vector<double> response_;  // real filter response, padded_/2 + 1 entries
    std::unique_ptr<Plans> plans_;
};

std::vector<double> fbp_reconstruct(std::span<const double> sinogram, const SliceGeometry& geometry,
                                    FbpFilter filter = FbpFilter::Ramp);

}  // namespace hsnct

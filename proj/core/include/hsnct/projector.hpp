#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hsnct/geometry.hpp"

namespace hsnct {

/// One detector row of a parallel-beam scan: an N x N image slice observed
/// at `angles` by N detector bins of the same pitch as the pixels.
///
/// Pixel (iy, ix) has center ((ix - N/2) h, (iy - N/2) h) and detector bin b
/// sits at ((b - N/2) h), with h the pixel pitch and N/2 integer division.
class SliceGeometry {
public:
    SliceGeometry(std::size_t image_size, std::vector<double> angles, double pixel_pitch = 1.0);

    static SliceGeometry from_scan(const ScanGeometry& scan);

    std::size_t image_size() const noexcept { return image_size_; }
    std::size_t num_detector_bins() const noexcept { return image_size_; }
    std::size_t num_angles() const noexcept { return angles_.size(); }
    std::span<const double> angles() const noexcept { return angles_; }
    double pixel_pitch() const noexcept { return pixel_pitch_; }

    std::size_t num_pixels() const noexcept { return image_size_ * image_size_; }
    std::size_t sinogram_size() const noexcept { return num_angles() * num_detector_bins(); }

    bool operator==(const SliceGeometry&) const = default;

private:
    std::size_t image_size_;
    std::vector<double> angles_;
    double pixel_pitch_;
};

/// Cubic B-spline detector kernel, B3(t) = 2/3 - t^2 + |t|^3/2 on |t| < 1,
/// (2 - |t|)^3 / 6 on 1 <= |t| < 2, zero beyond.
double detector_kernel(double t) noexcept;

/// Sparse system matrix of the pixel-driven projector.
///
/// Each pixel projects to u = x cos(theta) + y sin(theta) on the detector and
/// contributes h * B3(u/h - (b - N/2)) to bin b. The kernel shape does not
/// depend on the angle and the weights of a pixel sum to h per view. The
/// matrix is stored column-wise (per pixel) so the forward and back
/// projections read the same weights.
class ParallelBeamProjector {
public:
    struct Tap {
        std::uint32_t measurement;  // angle * bins + bin
        float weight;
    };

    explicit ParallelBeamProjector(SliceGeometry geometry);

    const SliceGeometry& geometry() const noexcept { return geometry_; }

    /// sinogram = A image. `sinogram` has num_angles x bins entries.
    void forward(std::span<const double> image, std::span<double> sinogram) const;
    /// image = A^T sinogram.
    void back(std::span<const double> sinogram, std::span<double> image) const;

    std::span<const Tap> column(std::size_t pixel) const noexcept {
        return std::span<const Tap>(taps_).subspan(column_start_[pixel],
                                                   column_start_[pixel + 1] - column_start_[pixel]);
    }

private:
    SliceGeometry geometry_;
    std::vector<std::size_t> column_start_;
    std::vector<Tap> taps_;
};

std::vector<double> forward_project(std::span<const double> image, const SliceGeometry& geometry);
std::vector<double> back_project(std::span<const double> sinogram, const SliceGeometry& geometry);

}  // namespace hsnct

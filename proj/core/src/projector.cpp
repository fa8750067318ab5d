#include "hsnct/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hsnct/errors.hpp"

namespace hsnct {

SliceGeometry::SliceGeometry(std::size_t image_size, std::vector<double> angles, double pixel_pitch)
    : image_size_(image_size), angles_(std::move(angles)), pixel_pitch_(pixel_pitch) {
    require(image_size_ >= 1, "slice image size must be >= 1");
    require(!angles_.empty(), "slice geometry needs at least one angle");
    for (double a : angles_) {
        require(std::isfinite(a) && a >= 0.0 && a < std::numbers::pi, "projection angles must lie in [0, pi)");
    }
    require(std::isfinite(pixel_pitch_) && pixel_pitch_ > 0.0, "pixel pitch must be positive");
}

SliceGeometry SliceGeometry::from_scan(const ScanGeometry& scan) {
    return SliceGeometry(scan.num_cols(), std::vector<double>(scan.view_angles().begin(), scan.view_angles().end()),
                         scan.pixel_pitch());
}

double detector_kernel(double t) noexcept {
    const double a = std::fabs(t);
    if (a < 1.0) {
        return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
    }
    if (a < 2.0) {
        const double r = 2.0 - a;
        return r * r * r / 6.0;
    }
    return 0.0;
}

ParallelBeamProjector::ParallelBeamProjector(SliceGeometry geometry) : geometry_(std::move(geometry)) {
    const std::size_t n = geometry_.image_size();
    const std::size_t bins = geometry_.num_detector_bins();
    const double center = static_cast<double>(n / 2);
    const double h = geometry_.pixel_pitch();
    const auto angles = geometry_.angles();

    std::vector<double> cosines(angles.size());
    std::vector<double> sines(angles.size());
    for (std::size_t a = 0; a < angles.size(); ++a) {
        cosines[a] = std::cos(angles[a]);
        sines[a] = std::sin(angles[a]);
    }

    column_start_.reserve(n * n + 1);
    taps_.reserve(n * n * angles.size() * 4);
    column_start_.push_back(0);
    for (std::size_t iy = 0; iy < n; ++iy) {
        const double y = static_cast<double>(iy) - center;
        for (std::size_t ix = 0; ix < n; ++ix) {
            const double x = static_cast<double>(ix) - center;
            for (std::size_t a = 0; a < angles.size(); ++a) {
                // Detector position in bin units; pixel pitch cancels.
                const double u = x * cosines[a] + y * sines[a] + center;
                const double base = std::floor(u);
                const double frac = u - base;
                const auto first = static_cast<long long>(base) - 1;
                for (int j = 0; j < 4; ++j) {
                    const long long b = first + j;
                    if (b < 0 || b >= static_cast<long long>(bins)) {
                        continue;
                    }
                    const double w = detector_kernel(frac + 1.0 - static_cast<double>(j));
                    if (w <= 0.0) {
                        continue;
                    }
                    taps_.push_back(Tap{static_cast<std::uint32_t>(a * bins + static_cast<std::size_t>(b)),
                                        static_cast<float>(h * w)});
                }
            }
            column_start_.push_back(taps_.size());
        }
    }
}

void ParallelBeamProjector::forward(std::span<const double> image, std::span<double> sinogram) const {
    require(image.size() == geometry_.num_pixels(), "image size does not match the slice geometry");
    require(sinogram.size() == geometry_.sinogram_size(), "sinogram size does not match the slice geometry");
    std::fill(sinogram.begin(), sinogram.end(), 0.0);
    for (std::size_t pix = 0; pix < image.size(); ++pix) {
        const double value = image[pix];
        if (value == 0.0) {
            continue;
        }
        for (const Tap& t : column(pix)) {
            sinogram[t.measurement] += static_cast<double>(t.weight) * value;
        }
    }
}

void ParallelBeamProjector::back(std::span<const double> sinogram, std::span<double> image) const {
    require(image.size() == geometry_.num_pixels(), "image size does not match the slice geometry");
    require(sinogram.size() == geometry_.sinogram_size(), "sinogram size does not match the slice geometry");
    for (std::size_t pix = 0; pix < image.size(); ++pix) {
        double acc = 0.0;
        for (const Tap& t : column(pix)) {
            acc += static_cast<double>(t.weight) * sinogram[t.measurement];
        }
        image[pix] = acc;
    }
}

std::vector<double> forward_project(std::span<const double> image, const SliceGeometry& geometry) {
    require(image.size() == geometry.num_pixels(),
            "image has " + std::to_string(image.size()) + " pixels, geometry expects " +
                std::to_string(geometry.num_pixels()));
    for (double v : image) {
        require(std::isfinite(v), "image must be finite");
    }
    const ParallelBeamProjector projector(geometry);
    std::vector<double> sinogram(geometry.sinogram_size());
    projector.forward(image, sinogram);
    return sinogram;
}

std::vector<double> back_project(std::span<const double> sinogram, const SliceGeometry& geometry) {
    require(sinogram.size() == geometry.sinogram_size(),
            "sinogram has " + std::to_string(sinogram.size()) + " entries, geometry expects " +
                std::to_string(geometry.sinogram_size()));
    const ParallelBeamProjector projector(geometry);
    std::vector<double> image(geometry.num_pixels());
    projector.back(sinogram, image);
    return image;
}

}  // namespace hsnct

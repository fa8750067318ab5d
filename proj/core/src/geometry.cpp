#include "hsnct/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hsnct/errors.hpp"

namespace hsnct {

ToFConverter::ToFConverter(double flight_path, double planck_h, double neutron_mass)
    : planck_h_(planck_h), neutron_mass_(neutron_mass), flight_path_(flight_path) {
    require(std::isfinite(planck_h) && planck_h > 0.0, "Planck constant must be positive");
    require(std::isfinite(neutron_mass) && neutron_mass > 0.0, "neutron mass must be positive");
    require(std::isfinite(flight_path) && flight_path > 0.0, "flight path L must be positive");
}

ScanGeometry::ScanGeometry(std::size_t num_rows, std::size_t num_cols, std::vector<double> view_angles,
                           double flight_path, double pixel_pitch)
    : num_rows_(num_rows),
      num_cols_(num_cols),
      view_angles_(std::move(view_angles)),
      flight_path_(flight_path),
      pixel_pitch_(pixel_pitch) {
    require(num_rows_ >= 1 && num_cols_ >= 1, "detector must have at least one row and column");
    require(!view_angles_.empty(), "scan needs at least one view");
    for (std::size_t i = 0; i < view_angles_.size(); ++i) {
        const double a = view_angles_[i];
        require(std::isfinite(a) && a >= 0.0 && a < std::numbers::pi,
                "view angle " + std::to_string(i) + " outside [0, pi)");
        require(i == 0 || a > view_angles_[i - 1], "view angles must be strictly increasing");
    }
    require(std::isfinite(flight_path_) && flight_path_ > 0.0, "flight path L must be positive");
    require(std::isfinite(pixel_pitch_) && pixel_pitch_ > 0.0, "pixel pitch must be positive");
}

ScanGeometry ScanGeometry::uniform(std::size_t num_views, std::size_t num_rows, std::size_t num_cols,
                                   double flight_path, double pixel_pitch) {
    require(num_views >= 1, "scan needs at least one view");
    std::vector<double> angles(num_views);
    for (std::size_t v = 0; v < num_views; ++v) {
        angles[v] = std::numbers::pi * static_cast<double>(v) / static_cast<double>(num_views);
    }
    return ScanGeometry(num_rows, num_cols, std::move(angles), flight_path, pixel_pitch);
}

SpectralAxis::SpectralAxis(std::vector<double> tof_edges, const ToFConverter& converter)
    : tof_edges_(std::move(tof_edges)), flight_path_(converter.flight_path()) {
    require(tof_edges_.size() >= 2, "spectral axis needs at least one bin (two ToF edges)");
    for (std::size_t i = 0; i < tof_edges_.size(); ++i) {
        require(std::isfinite(tof_edges_[i]) && tof_edges_[i] >= 0.0, "ToF edges must be finite and >= 0");
        require(i == 0 || tof_edges_[i] > tof_edges_[i - 1], "ToF edges must be strictly increasing");
    }
    wavelength_centers_.resize(tof_edges_.size() - 1);
    for (std::size_t k = 0; k < wavelength_centers_.size(); ++k) {
        const double center = 0.5 * (tof_edges_[k] + tof_edges_[k + 1]);
        wavelength_centers_[k] = converter.factor() * center;
    }
}

SpectralAxis SpectralAxis::uniform(std::size_t num_bins, double tof_min, double tof_max,
                                   const ToFConverter& converter) {
    require(num_bins >= 1, "spectral axis needs at least one bin");
    require(tof_max > tof_min, "tof_max must exceed tof_min");
    std::vector<double> edges(num_bins + 1);
    for (std::size_t i = 0; i <= num_bins; ++i) {
        edges[i] = tof_min + (tof_max - tof_min) * static_cast<double>(i) / static_cast<double>(num_bins);
    }
    return SpectralAxis(std::move(edges), converter);
}

}  // namespace hsnct

#include "hsnct/arrays.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsnct/errors.hpp"

namespace hsnct {
namespace {

bool all_finite(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

bool all_finite_nonneg(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x) && x >= 0.0f; });
}

std::string size_message(const char* what, std::size_t got, std::size_t expected) {
    return std::string(what) + " has " + std::to_string(got) + " entries, expected " + std::to_string(expected);
}

}  // namespace

RawScan::RawScan(ScanGeometry geometry, SpectralAxis axis, std::vector<float> counts, std::vector<float> open_beam)
    : geometry_(std::move(geometry)),
      axis_(std::move(axis)),
      counts_(std::move(counts)),
      open_beam_(std::move(open_beam)) {
    const std::size_t nk = axis_.num_bins();
    const std::size_t expected_counts = geometry_.num_measurements() * nk;
    const std::size_t expected_open = geometry_.num_rows() * geometry_.num_cols() * nk;
    require(counts_.size() == expected_counts, size_message("counts", counts_.size(), expected_counts));
    require(open_beam_.size() == expected_open, size_message("open beam", open_beam_.size(), expected_open));
    require(all_finite_nonneg(counts_), "counts must be finite and non-negative");
    require(all_finite_nonneg(open_beam_), "open-beam counts must be finite and non-negative");
}

HyperspectralSinogram::HyperspectralSinogram(ScanGeometry geometry, SpectralAxis axis, std::vector<float> values)
    : geometry_(std::move(geometry)), axis_(std::move(axis)), values_(std::move(values)) {
    const std::size_t expected = geometry_.num_measurements() * axis_.num_bins();
    require(values_.size() == expected, size_message("sinogram (N_p x N_k)", values_.size(), expected));
    require(all_finite(values_), "sinogram entries must be finite");
}

bool HyperspectralSinogram::is_nonnegative() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](float x) { return x >= 0.0f; });
}

SubspaceSinogram::SubspaceSinogram(ScanGeometry geometry, std::size_t rank, std::vector<float> coeffs,
                                   bool require_nonneg)
    : geometry_(std::move(geometry)), rank_(rank), coeffs_(std::move(coeffs)) {
    require(rank_ >= 1, "subspace rank N_s must be >= 1");
    const std::size_t expected = geometry_.num_measurements() * rank_;
    require(coeffs_.size() == expected, size_message("subspace sinogram (N_p x N_s)", coeffs_.size(), expected));
    if (require_nonneg) {
        require(all_finite_nonneg(coeffs_), "subspace coefficients must be finite and non-negative");
    } else {
        require(all_finite(coeffs_), "subspace coefficients must be finite");
    }
}

bool SubspaceSinogram::is_nonnegative() const noexcept {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](float x) { return x >= 0.0f; });
}

SpectralBasis::SpectralBasis(SpectralAxis axis, std::size_t rank, std::vector<float> basis)
    : axis_(std::move(axis)), rank_(rank), basis_(std::move(basis)) {
    require(rank_ >= 1, "basis rank N_s must be >= 1");
    const std::size_t expected = axis_.num_bins() * rank_;
    require(basis_.size() == expected, size_message("basis (N_k x N_s)", basis_.size(), expected));
    require(all_finite_nonneg(basis_), "basis entries must be finite and non-negative");
    for (std::size_t s = 0; s < rank_; ++s) {
        bool any = false;
        for (std::size_t k = 0; k < axis_.num_bins() && !any; ++k) {
            any = basis_[k * rank_ + s] > 0.0f;
        }
        require(any, "basis column " + std::to_string(s) + " is all zero");
    }
}

VolumeStack::VolumeStack(std::size_t num_slices, std::size_t image_size, std::size_t channels,
                         std::vector<float> voxels, double voxel_pitch)
    : num_slices_(num_slices),
      image_size_(image_size),
      channels_(channels),
      voxel_pitch_(voxel_pitch),
      voxels_(std::move(voxels)) {
    require(num_slices_ >= 1 && image_size_ >= 1, "volume must have at least one voxel");
    require(channels_ >= 1, "volume must have at least one channel");
    require(std::isfinite(voxel_pitch_) && voxel_pitch_ > 0.0, "voxel pitch must be positive");
    const std::size_t expected = num_voxels() * channels_;
    require(voxels_.size() == expected, size_message("volume (N_x x C)", voxels_.size(), expected));
    require(all_finite(voxels_), "volume entries must be finite");
}

VolumeStack VolumeStack::zeros(std::size_t num_slices, std::size_t image_size, std::size_t channels,
                               double voxel_pitch) {
    return VolumeStack(num_slices, image_size, channels,
                       std::vector<float>(num_slices * image_size * image_size * channels, 0.0f), voxel_pitch);
}

}  // namespace hsnct

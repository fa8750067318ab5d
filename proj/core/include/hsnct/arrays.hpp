#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hsnct/geometry.hpp"

namespace hsnct {

// All containers store f32 samples row-major with the spectral/channel index
// fastest-varying, so one row is the full spectrum of one measurement or voxel.

/// Raw detector counts y[v][r][c][k] and the open-beam radiograph y^o[r][c][k].
class RawScan {
public:
    RawScan(ScanGeometry geometry, SpectralAxis axis, std::vector<float> counts,
            std::vector<float> open_beam);

    const ScanGeometry& geometry() const noexcept { return geometry_; }
    const SpectralAxis& axis() const noexcept { return axis_; }
    std::span<const float> counts() const noexcept { return counts_; }
    std::span<const float> open_beam() const noexcept { return open_beam_; }

    bool operator==(const RawScan&) const = default;

private:
    ScanGeometry geometry_;
    SpectralAxis axis_;
    std::vector<float> counts_;
    std::vector<float> open_beam_;
};

/// Normalized projections p, viewed as an N_p x N_k matrix.
class HyperspectralSinogram {
public:
    HyperspectralSinogram(ScanGeometry geometry, SpectralAxis axis, std::vector<float> values);

    const ScanGeometry& geometry() const noexcept { return geometry_; }
    const SpectralAxis& axis() const noexcept { return axis_; }
    std::span<const float> values() const noexcept { return values_; }

    std::size_t num_measurements() const noexcept { return geometry_.num_measurements(); }
    std::size_t num_bins() const noexcept { return axis_.num_bins(); }
    std::span<const float> spectrum(std::size_t measurement) const noexcept {
        return std::span<const float>(values_).subspan(measurement * num_bins(), num_bins());
    }
    bool is_nonnegative() const noexcept;

    bool operator==(const HyperspectralSinogram&) const = default;

private:
    ScanGeometry geometry_;
    SpectralAxis axis_;
    std::vector<float> values_;
};

/// Subspace coefficient views V^s, N_p x N_s. Non-negative unless built with
/// `require_nonneg = false` (unconstrained projection onto a fixed basis).
class SubspaceSinogram {
public:
    SubspaceSinogram(ScanGeometry geometry, std::size_t rank, std::vector<float> coeffs,
                     bool require_nonneg = true);

    const ScanGeometry& geometry() const noexcept { return geometry_; }
    std::size_t rank() const noexcept { return rank_; }
    std::size_t num_measurements() const noexcept { return geometry_.num_measurements(); }
    std::span<const float> coeffs() const noexcept { return coeffs_; }
    bool is_nonnegative() const noexcept;

    bool operator==(const SubspaceSinogram&) const = default;

private:
    ScanGeometry geometry_;
    std::size_t rank_;
    std::vector<float> coeffs_;
};

/// Spectral basis D^s, N_k x N_s, non-negative with no all-zero column.
class SpectralBasis {
public:
    SpectralBasis(SpectralAxis axis, std::size_t rank, std::vector<float> basis);

    const SpectralAxis& axis() const noexcept { return axis_; }
    std::size_t rank() const noexcept { return rank_; }
    std::size_t num_bins() const noexcept { return axis_.num_bins(); }
    std::span<const float> values() const noexcept { return basis_; }
    float at(std::size_t bin, std::size_t channel) const noexcept { return basis_[bin * rank_ + channel]; }

    bool operator==(const SpectralBasis&) const = default;

private:
    SpectralAxis axis_;
    std::size_t rank_;
    std::vector<float> basis_;
};

/// Reconstructed voxels [slice][y][x][channel]; N_x = N_r * N_c * N_c.
class VolumeStack {
public:
    VolumeStack(std::size_t num_slices, std::size_t image_size, std::size_t channels,
                std::vector<float> voxels, double voxel_pitch = 1.0);

    static VolumeStack zeros(std::size_t num_slices, std::size_t image_size, std::size_t channels,
                             double voxel_pitch = 1.0);

    std::size_t num_slices() const noexcept { return num_slices_; }
    std::size_t image_size() const noexcept { return image_size_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t num_voxels() const noexcept { return num_slices_ * image_size_ * image_size_; }
    double voxel_pitch() const noexcept { return voxel_pitch_; }

    std::span<const float> voxels() const noexcept { return voxels_; }

    std::size_t index(std::size_t slice, std::size_t y, std::size_t x, std::size_t channel) const noexcept {
        return ((slice * image_size_ + y) * image_size_ + x) * channels_ + channel;
    }
    float at(std::size_t slice, std::size_t y, std::size_t x, std::size_t channel) const noexcept {
        return voxels_[index(slice, y, x, channel)];
    }

    bool operator==(const VolumeStack&) const = default;

private:
    std::size_t num_slices_;
    std::size_t image_size_;
    std::size_t channels_;
    double voxel_pitch_;
    std::vector<float> voxels_;
};

}  // namespace hsnct

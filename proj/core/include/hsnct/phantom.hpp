#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsnct/arrays.hpp"
#include "hsnct/geometry.hpp"

namespace hsnct {

/// A smooth step in attenuation at `edge_wavelength`, going from `pre_level`
/// to `post_level` through a normal-CDF ramp of standard deviation `width`.
struct EdgeFeature {
    double edge_wavelength;  // m
    double pre_level;
    double post_level;
    double width;  // m
};

struct MaterialSpectrum {
    std::string name;
    double baseline = 0.0;
    std::vector<EdgeFeature> edges;

    /// Attenuation per unit length at wavelength `lambda` (m).
    double attenuation(double lambda) const;
    void validate() const;
};

enum class ShapeKind {
    Ellipse,
    Rectangle,
};

/// In-plane placement in pixel units relative to the slice center, rotated by
/// `rotation` radians, occupying slices [slice_begin, slice_end).
struct PhantomShape {
    ShapeKind kind = ShapeKind::Ellipse;
    double center_x = 0.0;
    double center_y = 0.0;
    double half_width = 1.0;
    double half_height = 1.0;
    double rotation = 0.0;
    std::size_t slice_begin = 0;
    std::size_t slice_end = 1;
    std::size_t material = 0;
};

struct PhantomSpec {
    std::size_t image_size = 64;
    std::size_t num_slices = 1;
    std::vector<PhantomShape> shapes;
    std::vector<MaterialSpectrum> materials;
    double flux = 200.0;  // expected open-beam counts per bin
    std::uint64_t seed = 0;

    void validate() const;
};

std::string to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const std::string& json);

/// Voxel value at bin k is the material attenuation at wavelength_centers[k];
/// later shapes overwrite earlier ones, background is zero.
VolumeStack build_ground_truth(const PhantomSpec& spec, const SpectralAxis& axis, double voxel_pitch = 1.0);

struct SimulationOptions {
    bool poisson_noise = true;  // false stores expected counts
};

/// Beer-Lambert transmission of forward-projected line integrals with Poisson
/// counting noise on sample and open-beam radiographs. Variates are keyed by
/// (seed, view, row, col, bin); the open beam uses view index N_v.
RawScan simulate_scan(const VolumeStack& truth, const ScanGeometry& geometry, const SpectralAxis& axis,
                      double flux, std::uint64_t seed, const SimulationOptions& opts = {}, int threads = 1);

struct BenchmarkPhantom {
    PhantomSpec spec;
    SpectralAxis axis;
    ScanGeometry geometry;
};

/// 64 x 64 slices, 16 rows, 32 views, 256 bins, three edge materials,
/// 200 counts per bin.
BenchmarkPhantom default_benchmark_phantom();

/// Same materials and layout at 32 x 32, 4 rows, 16 views and 32 bins; for
/// smoke tests.
BenchmarkPhantom tiny_benchmark_phantom();

}  // namespace hsnct

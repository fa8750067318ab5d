#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsnct/arrays.hpp"

namespace hsnct {

// .hsnct container layout:
//   bytes 0..7   magic "HSNCT1\n\0"
//   bytes 8..15  u64 little-endian length N of the JSON header
//   N bytes      UTF-8 JSON header
//   rest         f32 little-endian samples, row-major over header.shape
inline constexpr char kContainerMagic[8] = {'H', 'S', 'N', 'C', 'T', '1', '\n', '\0'};

namespace axis_order {
inline constexpr const char* kViewRowColBin = "view,row,col,bin";
inline constexpr const char* kViewRowColChannel = "view,row,col,channel";
inline constexpr const char* kRowColSliceChannel = "row,col,slice,channel";
inline constexpr const char* kBinChannel = "bin,channel";
}  // namespace axis_order

namespace role {
inline constexpr const char* kRawScan = "raw-scan";
inline constexpr const char* kSinogram = "hyperspectral-sinogram";
inline constexpr const char* kSubspaceSinogram = "subspace-sinogram";
inline constexpr const char* kBasis = "basis";
inline constexpr const char* kVolume = "volume";
}  // namespace role

/// Metadata written in front of the samples. `geometry_json`, `spectral_json`
/// and `extra_json` hold serialized JSON objects (or are empty).
struct ContainerHeader {
    std::string role;
    std::vector<std::size_t> shape;
    std::string axis_order;
    std::string geometry_json;
    std::string spectral_json;
    std::string extra_json;

    std::size_t element_count() const noexcept;
};

struct Container {
    ContainerHeader header;
    std::vector<float> data;
};

void write_container(const std::filesystem::path& path, const ContainerHeader& header,
                     std::span<const float> data);
Container read_container(const std::filesystem::path& path);

// Typed wrappers. Readers validate the invariants of the declared type.
void save(const std::filesystem::path& path, const RawScan& scan);
void save(const std::filesystem::path& path, const HyperspectralSinogram& sinogram);
void save(const std::filesystem::path& path, const SubspaceSinogram& sinogram);
void save(const std::filesystem::path& path, const SpectralBasis& basis);
/// Volumes are stored as [row, col, slice, channel]. A spectral axis, when
/// given, labels the channels as wavelength bins.
void save(const std::filesystem::path& path, const VolumeStack& volume,
          const std::optional<SpectralAxis>& axis = std::nullopt);

RawScan load_raw_scan(const std::filesystem::path& path);
HyperspectralSinogram load_sinogram(const std::filesystem::path& path);
SubspaceSinogram load_subspace_sinogram(const std::filesystem::path& path);
SpectralBasis load_basis(const std::filesystem::path& path);
VolumeStack load_volume(const std::filesystem::path& path);

/// Reads only the header; used to dispatch on `role`.
ContainerHeader read_container_header(const std::filesystem::path& path);

/// Spectral axis recorded in a volume header, if any.
std::optional<SpectralAxis> volume_spectral_axis(const ContainerHeader& header);

// JSON forms of the shared metadata types.
std::string to_json(const ScanGeometry& geometry);
std::string to_json(const SpectralAxis& axis);
ScanGeometry scan_geometry_from_json(const std::string& json);
SpectralAxis spectral_axis_from_json(const std::string& json);

}  // namespace hsnct

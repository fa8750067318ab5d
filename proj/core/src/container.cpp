#include "hsnct/container.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "hsnct/errors.hpp"

namespace hsnct {
namespace {

using nlohmann::json;

constexpr std::size_t kMagicSize = sizeof(kContainerMagic);
constexpr std::size_t kLengthSize = 8;
constexpr std::uint64_t kMaxHeaderBytes = 64ull << 20;

const std::set<std::string>& allowed_axis_orders() {
    static const std::set<std::string> orders{axis_order::kViewRowColBin, axis_order::kViewRowColChannel,
                                              axis_order::kRowColSliceChannel, axis_order::kBinChannel};
    return orders;
}

void put_u64le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
}

std::uint64_t get_u64le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

json parse_object(const std::string& text, const char* what) {
    if (text.empty()) {
        return json::object();
    }
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ValidationError(std::string("container ") + what + " is not a JSON object");
    }
    return j;
}

void validate_header(const ContainerHeader& header) {
    require(!header.shape.empty(), "container shape must not be empty");
    for (std::size_t d : header.shape) {
        require(d >= 1, "container shape has a zero-length dimension");
    }
    require(allowed_axis_orders().contains(header.axis_order),
            "axis_order '" + header.axis_order + "' is not one of the allowed orders");
    const std::size_t commas = static_cast<std::size_t>(std::count(header.axis_order.begin(), header.axis_order.end(), ','));
    require(commas + 1 == header.shape.size(), "axis_order '" + header.axis_order + "' does not match shape rank " +
                                                   std::to_string(header.shape.size()));
}

std::string header_to_json(const ContainerHeader& header) {
    json j;
    j["dtype"] = "f32le";
    j["role"] = header.role;
    j["shape"] = header.shape;
    j["axis_order"] = header.axis_order;
    j["geometry"] = parse_object(header.geometry_json, "geometry");
    j["spectral"] = parse_object(header.spectral_json, "spectral");
    j["extra"] = parse_object(header.extra_json, "extra");
    return j.dump();
}

ContainerHeader header_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw IoError("container header is not valid JSON");
    }
    try {
        if (j.at("dtype").get<std::string>() != "f32le") {
            throw ValidationError("unsupported dtype '" + j.at("dtype").get<std::string>() + "'");
        }
        ContainerHeader h;
        h.role = j.value("role", std::string{});
        h.shape = j.at("shape").get<std::vector<std::size_t>>();
        h.axis_order = j.at("axis_order").get<std::string>();
        h.geometry_json = j.contains("geometry") ? j["geometry"].dump() : std::string{};
        h.spectral_json = j.contains("spectral") ? j["spectral"].dump() : std::string{};
        h.extra_json = j.contains("extra") ? j["extra"].dump() : std::string{};
        return h;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed container header: ") + e.what());
    }
}

void read_prefix_and_header(std::ifstream& in, const std::filesystem::path& path, ContainerHeader& header) {
    std::array<unsigned char, kMagicSize + kLengthSize> prefix{};
    in.read(reinterpret_cast<char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got < kMagicSize || std::memcmp(prefix.data(), kContainerMagic, kMagicSize) != 0) {
        throw BadMagicError(path.string() + ": not an .hsnct container (bad magic)");
    }
    if (got < prefix.size()) {
        throw TruncatedFileError(path.string() + ": truncated before header length");
    }
    const std::uint64_t header_len = get_u64le(prefix.data() + kMagicSize);
    if (header_len > kMaxHeaderBytes) {
        throw IoError(path.string() + ": implausible header length");
    }
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (static_cast<std::uint64_t>(in.gcount()) != header_len) {
        throw TruncatedFileError(path.string() + ": truncated inside JSON header");
    }
    header = header_from_json(text);
}

// Shared metadata conversions.

json geometry_json(const ScanGeometry& g) {
    json j;
    j["num_views"] = g.num_views();
    j["num_rows"] = g.num_rows();
    j["num_cols"] = g.num_cols();
    j["view_angles"] = std::vector<double>(g.view_angles().begin(), g.view_angles().end());
    j["flight_path"] = g.flight_path();
    j["pixel_pitch"] = g.pixel_pitch();
    return j;
}

json spectral_json(const SpectralAxis& a) {
    json j;
    j["num_bins"] = a.num_bins();
    j["tof_edges"] = std::vector<double>(a.tof_edges().begin(), a.tof_edges().end());
    j["wavelength_centers"] = std::vector<double>(a.wavelength_centers().begin(), a.wavelength_centers().end());
    j["flight_path"] = a.flight_path();
    return j;
}

void check_role(const ContainerHeader& h, const char* expected, const std::filesystem::path& path) {
    require(h.role == expected,
            path.string() + ": container role is '" + h.role + "', expected '" + expected + "'");
}

void check_shape(const ContainerHeader& h, const std::vector<std::size_t>& expected, const std::filesystem::path& path) {
    require(h.shape == expected, path.string() + ": container shape does not match its geometry metadata");
}

json extra_of(const ContainerHeader& h) { return parse_object(h.extra_json, "extra"); }

}  // namespace

std::size_t ContainerHeader::element_count() const noexcept {
    if (shape.empty()) {
        return 0;
    }
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

void write_container(const std::filesystem::path& path, const ContainerHeader& header, std::span<const float> data) {
    validate_header(header);
    require(header.element_count() == data.size(),
            "data has " + std::to_string(data.size()) + " elements but header shape declares " +
                std::to_string(header.element_count()));

    const std::string text = header_to_json(header);
    std::string prefix(kContainerMagic, kMagicSize);
    put_u64le(prefix, text.size());

    std::vector<unsigned char> payload(data.size() * 4);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(data[i]);
        payload[4 * i + 0] = static_cast<unsigned char>(bits & 0xffu);
        payload[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xffu);
        payload[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xffu);
        payload[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xffu);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) {
        throw IoError("write to '" + path.string() + "' failed");
    }
}

ContainerHeader read_container_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    ContainerHeader header;
    read_prefix_and_header(in, path, header);
    validate_header(header);
    return header;
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    Container c;
    read_prefix_and_header(in, path, c.header);
    validate_header(c.header);

    const std::size_t n = c.header.element_count();
    std::vector<unsigned char> payload(n * 4);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        throw TruncatedFileError(path.string() + ": payload truncated (declared " + std::to_string(payload.size()) +
                                 " bytes, found " + std::to_string(in.gcount()) + ")");
    }
    c.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(payload[4 * i]) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 3]) << 24);
        c.data[i] = std::bit_cast<float>(bits);
    }
    for (float x : c.data) {
        if (std::isnan(x)) {
            throw ValidationError(path.string() + ": NaN entry in container payload");
        }
    }
    return c;
}

std::string to_json(const ScanGeometry& geometry) { return geometry_json(geometry).dump(); }

std::string to_json(const SpectralAxis& axis) { return spectral_json(axis).dump(); }

ScanGeometry scan_geometry_from_json(const std::string& text) {
    const json j = parse_object(text, "geometry");
    try {
        const auto rows = j.at("num_rows").get<std::size_t>();
        const auto cols = j.at("num_cols").get<std::size_t>();
        const double flight_path = j.at("flight_path").get<double>();
        const double pitch = j.value("pixel_pitch", 1.0);
        if (j.contains("view_angles")) {
            auto angles = j.at("view_angles").get<std::vector<double>>();
            if (j.contains("num_views")) {
                require(j.at("num_views").get<std::size_t>() == angles.size(),
                        "num_views does not match the number of view_angles");
            }
            return ScanGeometry(rows, cols, std::move(angles), flight_path, pitch);
        }
        return ScanGeometry::uniform(j.at("num_views").get<std::size_t>(), rows, cols, flight_path, pitch);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid geometry JSON: ") + e.what());
    }
}

SpectralAxis spectral_axis_from_json(const std::string& text) {
    const json j = parse_object(text, "spectral");
    try {
        const ToFConverter converter(j.at("flight_path").get<double>());
        if (j.contains("tof_edges")) {
            return SpectralAxis(j.at("tof_edges").get<std::vector<double>>(), converter);
        }
        return SpectralAxis::uniform(j.at("num_bins").get<std::size_t>(), j.at("tof_min").get<double>(),
                                     j.at("tof_max").get<double>(), converter);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid spectral JSON: ") + e.what());
    }
}

// Typed wrappers.

void save(const std::filesystem::path& path, const RawScan& scan) {
    const auto& g = scan.geometry();
    const std::size_t nk = scan.axis().num_bins();
    ContainerHeader h;
    h.role = role::kRawScan;
    h.shape = {g.num_views() + 1, g.num_rows(), g.num_cols(), nk};
    h.axis_order = axis_order::kViewRowColBin;
    h.geometry_json = to_json(g);
    h.spectral_json = to_json(scan.axis());
    h.extra_json = json{{"open_beam_view", g.num_views()}}.dump();

    std::vector<float> data;
    data.reserve(scan.counts().size() + scan.open_beam().size());
    data.insert(data.end(), scan.counts().begin(), scan.counts().end());
    data.insert(data.end(), scan.open_beam().begin(), scan.open_beam().end());
    write_container(path, h, data);
}

void save(const std::filesystem::path& path, const HyperspectralSinogram& sinogram) {
    const auto& g = sinogram.geometry();
    ContainerHeader h;
    h.role = role::kSinogram;
    h.shape = {g.num_views(), g.num_rows(), g.num_cols(), sinogram.num_bins()};
    h.axis_order = axis_order::kViewRowColBin;
    h.geometry_json = to_json(g);
    h.spectral_json = to_json(sinogram.axis());
    write_container(path, h, sinogram.values());
}

void save(const std::filesystem::path& path, const SubspaceSinogram& sinogram) {
    const auto& g = sinogram.geometry();
    ContainerHeader h;
    h.role = role::kSubspaceSinogram;
    h.shape = {g.num_views(), g.num_rows(), g.num_cols(), sinogram.rank()};
    h.axis_order = axis_order::kViewRowColChannel;
    h.geometry_json = to_json(g);
    h.extra_json = json{{"nonnegative", sinogram.is_nonnegative()}}.dump();
    write_container(path, h, sinogram.coeffs());
}

void save(const std::filesystem::path& path, const SpectralBasis& basis) {
    ContainerHeader h;
    h.role = role::kBasis;
    h.shape = {basis.num_bins(), basis.rank()};
    h.axis_order = axis_order::kBinChannel;
    h.spectral_json = to_json(basis.axis());
    write_container(path, h, basis.values());
}

void save(const std::filesystem::path& path, const VolumeStack& volume, const std::optional<SpectralAxis>& axis) {
    ContainerHeader h;
    h.role = role::kVolume;
    h.shape = {volume.image_size(), volume.image_size(), volume.num_slices(), volume.channels()};
    h.axis_order = axis_order::kRowColSliceChannel;
    if (axis) {
        h.spectral_json = to_json(*axis);
    }
    h.extra_json = json{{"voxel_pitch", volume.voxel_pitch()}}.dump();
    // In memory the slice index is outermost; on disk it follows the column.
    const std::size_t n = volume.image_size();
    const std::size_t nz = volume.num_slices();
    const std::size_t nc = volume.channels();
    const auto src = volume.voxels();
    std::vector<float> data(src.size());
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                const std::size_t from = volume.index(z, y, x, 0);
                const std::size_t to = ((y * n + x) * nz + z) * nc;
                std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), nc,
                            data.begin() + static_cast<std::ptrdiff_t>(to));
            }
        }
    }
    write_container(path, h, data);
}

RawScan load_raw_scan(const std::filesystem::path& path) {
    Container c = read_container(path);
    check_role(c.header, role::kRawScan, path);
    ScanGeometry g = scan_geometry_from_json(c.header.geometry_json);
    SpectralAxis a = spectral_axis_from_json(c.header.spectral_json);
    check_shape(c.header, {g.num_views() + 1, g.num_rows(), g.num_cols(), a.num_bins()}, path);
    const std::size_t split = g.num_measurements() * a.num_bins();
    std::vector<float> open(c.data.begin() + static_cast<std::ptrdiff_t>(split), c.data.end());
    c.data.resize(split);
    return RawScan(std::move(g), std::move(a), std::move(c.data), std::move(open));
}

HyperspectralSinogram load_sinogram(const std::filesystem::path& path) {
    Container c = read_container(path);
    check_role(c.header, role::kSinogram, path);
    ScanGeometry g = scan_geometry_from_json(c.header.geometry_json);
    SpectralAxis a = spectral_axis_from_json(c.header.spectral_json);
    check_shape(c.header, {g.num_views(), g.num_rows(), g.num_cols(), a.num_bins()}, path);
    return HyperspectralSinogram(std::move(g), std::move(a), std::move(c.data));
}

SubspaceSinogram load_subspace_sinogram(const std::filesystem::path& path) {
    Container c = read_container(path);
    check_role(c.header, role::kSubspaceSinogram, path);
    ScanGeometry g = scan_geometry_from_json(c.header.geometry_json);
    const std::size_t rank = c.header.shape.back();
    check_shape(c.header, {g.num_views(), g.num_rows(), g.num_cols(), rank}, path);
    const bool nonneg = extra_of(c.header).value("nonnegative", true);
    return SubspaceSinogram(std::move(g), rank, std::move(c.data), nonneg);
}

SpectralBasis load_basis(const std::filesystem::path& path) {
    Container c = read_container(path);
    check_role(c.header, role::kBasis, path);
    SpectralAxis a = spectral_axis_from_json(c.header.spectral_json);
    require(c.header.shape.size() == 2 && c.header.shape[0] == a.num_bins(),
            path.string() + ": basis shape does not match its spectral axis");
    const std::size_t rank = c.header.shape[1];
    return SpectralBasis(std::move(a), rank, std::move(c.data));
}

VolumeStack load_volume(const std::filesystem::path& path) {
    Container c = read_container(path);
    check_role(c.header, role::kVolume, path);
    const auto& s = c.header.shape;
    require(s.size() == 4 && s[0] == s[1], path.string() + ": volume shape must be [N, N, slices, channels]");
    require(c.header.axis_order == axis_order::kRowColSliceChannel,
            path.string() + ": volume axis_order must be " + axis_order::kRowColSliceChannel);
    const double pitch = extra_of(c.header).value("voxel_pitch", 1.0);
    const std::size_t n = s[0];
    const std::size_t nz = s[2];
    const std::size_t nc = s[3];
    std::vector<float> voxels(c.data.size());
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t z = 0; z < nz; ++z) {
                const std::size_t from = ((y * n + x) * nz + z) * nc;
                const std::size_t to = ((z * n + y) * n + x) * nc;
                std::copy_n(c.data.begin() + static_cast<std::ptrdiff_t>(from), nc,
                            voxels.begin() + static_cast<std::ptrdiff_t>(to));
            }
        }
    }
    return VolumeStack(nz, n, nc, std::move(voxels), pitch);
}

std::optional<SpectralAxis> volume_spectral_axis(const ContainerHeader& header) {
    const json j = parse_object(header.spectral_json, "spectral");
    if (j.empty()) {
        return std::nullopt;
    }
    return spectral_axis_from_json(header.spectral_json);
}

}  // namespace hsnct

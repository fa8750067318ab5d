#include "hsnct/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "hsnct/errors.hpp"
#include "hsnct/projector.hpp"
#include "hsnct/random.hpp"

namespace hsnct {
namespace {

using nlohmann::json;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct HalfExtent {
    double x;
    double y;
};

HalfExtent half_extent(const PhantomShape& s) {
    const double c = std::fabs(std::cos(s.rotation));
    const double n = std::fabs(std::sin(s.rotation));
    if (s.kind == ShapeKind::Ellipse) {
        return {std::sqrt(s.half_width * s.half_width * c * c + s.half_height * s.half_height * n * n),
                std::sqrt(s.half_width * s.half_width * n * n + s.half_height * s.half_height * c * c)};
    }
    return {s.half_width * c + s.half_height * n, s.half_width * n + s.half_height * c};
}

bool contains(const PhantomShape& s, double x, double y) {
    const double dx = x - s.center_x;
    const double dy = y - s.center_y;
    const double c = std::cos(s.rotation);
    const double n = std::sin(s.rotation);
    const double lx = dx * c + dy * n;
    const double ly = -dx * n + dy * c;
    if (s.kind == ShapeKind::Ellipse) {
        const double ex = lx / s.half_width;
        const double ey = ly / s.half_height;
        return ex * ex + ey * ey <= 1.0;
    }
    return std::fabs(lx) <= s.half_width && std::fabs(ly) <= s.half_height;
}

std::string shape_kind_name(ShapeKind k) { return k == ShapeKind::Ellipse ? "ellipse" : "rectangle"; }

ShapeKind parse_shape_kind(const std::string& name) {
    if (name == "ellipse") {
        return ShapeKind::Ellipse;
    }
    if (name == "rectangle") {
        return ShapeKind::Rectangle;
    }
    throw ValidationError("unknown shape kind '" + name + "' (expected ellipse or rectangle)");
}

double angstrom(double a) { return a * 1e-10; }

std::vector<MaterialSpectrum> benchmark_materials() {
    return {
        MaterialSpectrum{"matrix", 0.012, {{angstrom(2.0), 0.0, 0.016, angstrom(0.03)}}},
        MaterialSpectrum{"inclusion-a", 0.020, {{angstrom(3.2), 0.012, 0.0, angstrom(0.04)}}},
        MaterialSpectrum{"inclusion-b",
                         0.006,
                         {{angstrom(2.6), 0.008, 0.0, angstrom(0.03)}, {angstrom(4.1), 0.0, 0.020, angstrom(0.05)}}},
    };
}

}  // namespace

double MaterialSpectrum::attenuation(double lambda) const {
    double value = baseline;
    for (const auto& e : edges) {
        value += e.pre_level + (e.post_level - e.pre_level) * normal_cdf((lambda - e.edge_wavelength) / e.width);
    }
    return value;
}

void MaterialSpectrum::validate() const {
    require(std::isfinite(baseline) && baseline >= 0.0, "material '" + name + "': baseline must be >= 0");
    for (const auto& e : edges) {
        require(std::isfinite(e.edge_wavelength) && e.edge_wavelength > 0.0,
                "material '" + name + "': edge wavelength must be positive");
        require(std::isfinite(e.pre_level) && e.pre_level >= 0.0 && std::isfinite(e.post_level) && e.post_level >= 0.0,
                "material '" + name + "': edge levels must be >= 0");
        require(std::isfinite(e.width) && e.width > 0.0, "material '" + name + "': edge width must be positive");
    }
}

void PhantomSpec::validate() const {
    require(image_size >= 1, "phantom image size must be >= 1");
    require(num_slices >= 1, "phantom needs at least one slice");
    require(!materials.empty(), "phantom needs at least one material");
    require(std::isfinite(flux) && flux > 0.0, "phantom flux I_0 must be positive");
    for (const auto& m : materials) {
        m.validate();
    }
    const double lo = -static_cast<double>(image_size / 2) - 0.5;
    const double hi = static_cast<double>(image_size - 1 - image_size / 2) + 0.5;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto& s = shapes[i];
        const std::string tag = "shape " + std::to_string(i);
        require(s.material < materials.size(), tag + ": material index out of range");
        require(s.half_width > 0.0 && s.half_height > 0.0, tag + ": extents must be positive");
        require(s.slice_begin < s.slice_end && s.slice_end <= num_slices, tag + ": slice range outside the phantom");
        const auto ext = half_extent(s);
        require(s.center_x - ext.x >= lo && s.center_x + ext.x <= hi && s.center_y - ext.y >= lo &&
                    s.center_y + ext.y <= hi,
                tag + ": shape extends outside the image");
    }
}

std::string to_json(const PhantomSpec& spec) {
    json j;
    j["image_size"] = spec.image_size;
    j["num_slices"] = spec.num_slices;
    j["flux"] = spec.flux;
    j["seed"] = spec.seed;
    j["materials"] = json::array();
    for (const auto& m : spec.materials) {
        json jm{{"name", m.name}, {"baseline", m.baseline}, {"edges", json::array()}};
        for (const auto& e : m.edges) {
            jm["edges"].push_back({{"edge_wavelength", e.edge_wavelength},
                                   {"pre_level", e.pre_level},
                                   {"post_level", e.post_level},
                                   {"width", e.width}});
        }
        j["materials"].push_back(jm);
    }
    j["shapes"] = json::array();
    for (const auto& s : spec.shapes) {
        j["shapes"].push_back({{"kind", shape_kind_name(s.kind)},
                               {"center_x", s.center_x},
                               {"center_y", s.center_y},
                               {"half_width", s.half_width},
                               {"half_height", s.half_height},
                               {"rotation", s.rotation},
                               {"slice_begin", s.slice_begin},
                               {"slice_end", s.slice_end},
                               {"material", s.material}});
    }
    return j.dump(2);
}

PhantomSpec phantom_spec_from_json(const std::string& text) {
    const json j = json::parse(text, nullptr, false);
    require(!j.is_discarded() && j.is_object(), "phantom spec is not a JSON object");
    try {
        PhantomSpec spec;
        spec.image_size = j.at("image_size").get<std::size_t>();
        spec.num_slices = j.value("num_slices", std::size_t{1});
        spec.flux = j.value("flux", 200.0);
        spec.seed = j.value("seed", std::uint64_t{0});
        for (const auto& jm : j.at("materials")) {
            MaterialSpectrum m;
            m.name = jm.value("name", std::string{});
            m.baseline = jm.value("baseline", 0.0);
            for (const auto& je : jm.value("edges", json::array())) {
                m.edges.push_back({je.at("edge_wavelength").get<double>(), je.at("pre_level").get<double>(),
                                   je.at("post_level").get<double>(), je.at("width").get<double>()});
            }
            spec.materials.push_back(std::move(m));
        }
        for (const auto& js : j.value("shapes", json::array())) {
            PhantomShape s;
            s.kind = parse_shape_kind(js.value("kind", std::string("ellipse")));
            s.center_x = js.value("center_x", 0.0);
            s.center_y = js.value("center_y", 0.0);
            s.half_width = js.at("half_width").get<double>();
            s.half_height = js.at("half_height").get<double>();
            s.rotation = js.value("rotation", 0.0);
            s.slice_begin = js.value("slice_begin", std::size_t{0});
            s.slice_end = js.value("slice_end", spec.num_slices);
            s.material = js.at("material").get<std::size_t>();
            spec.shapes.push_back(s);
        }
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid phantom spec: ") + e.what());
    }
}

VolumeStack build_ground_truth(const PhantomSpec& spec, const SpectralAxis& axis, double voxel_pitch) {
    spec.validate();
    const auto lambdas = axis.wavelength_centers();
    const double lambda_lo = lambdas.front();
    const double lambda_hi = lambdas.back();
    for (const auto& m : spec.materials) {
        for (const auto& e : m.edges) {
            require(e.edge_wavelength >= lambda_lo && e.edge_wavelength <= lambda_hi,
                    "material '" + m.name + "' has an edge outside the spectral axis range");
        }
    }

    const std::size_t nk = axis.num_bins();
    std::vector<std::vector<float>> spectra(spec.materials.size(), std::vector<float>(nk));
    for (std::size_t m = 0; m < spec.materials.size(); ++m) {
        for (std::size_t k = 0; k < nk; ++k) {
            spectra[m][k] = static_cast<float>(spec.materials[m].attenuation(lambdas[k]));
        }
    }

    const std::size_t n = spec.image_size;
    const double center = static_cast<double>(n / 2);
    std::vector<float> voxels(spec.num_slices * n * n * nk, 0.0f);
    for (std::size_t z = 0; z < spec.num_slices; ++z) {
        for (std::size_t iy = 0; iy < n; ++iy) {
            for (std::size_t ix = 0; ix < n; ++ix) {
                const double x = static_cast<double>(ix) - center;
                const double y = static_cast<double>(iy) - center;
                const std::vector<float>* material = nullptr;
                for (const auto& s : spec.shapes) {
                    if (z >= s.slice_begin && z < s.slice_end && contains(s, x, y)) {
                        material = &spectra[s.material];
                    }
                }
                if (material != nullptr) {
                    std::copy(material->begin(), material->end(),
                              voxels.begin() + static_cast<std::ptrdiff_t>(((z * n + iy) * n + ix) * nk));
                }
            }
        }
    }
    return VolumeStack(spec.num_slices, n, nk, std::move(voxels), voxel_pitch);
}

RawScan simulate_scan(const VolumeStack& truth, const ScanGeometry& geometry, const SpectralAxis& axis, double flux,
                      std::uint64_t seed, const SimulationOptions& opts, int threads) {
    require(std::isfinite(flux) && flux > 0.0, "flux I_0 must be positive");
    require(threads >= 1, "thread count must be >= 1");
    require(truth.num_slices() == geometry.num_rows(),
            "truth has " + std::to_string(truth.num_slices()) + " slices, geometry has " +
                std::to_string(geometry.num_rows()) + " detector rows");
    require(truth.image_size() == geometry.num_cols(),
            "truth slices are " + std::to_string(truth.image_size()) + " wide, detector has " +
                std::to_string(geometry.num_cols()) + " columns");
    require(truth.channels() == axis.num_bins(), "truth has " + std::to_string(truth.channels()) +
                                                     " channels, spectral axis has " +
                                                     std::to_string(axis.num_bins()) + " bins");

    const std::size_t nv = geometry.num_views();
    const std::size_t nr = geometry.num_rows();
    const std::size_t nc = geometry.num_cols();
    const std::size_t nk = axis.num_bins();
    const ParallelBeamProjector projector(SliceGeometry::from_scan(geometry));
    const auto vox = truth.voxels();

    std::vector<float> counts(nv * nr * nc * nk);
    std::vector<float> open(nr * nc * nk);
    bool finite = true;

    const auto rows_signed = static_cast<std::ptrdiff_t>(nr);
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1) reduction(&& : finite)
    for (std::ptrdiff_t rs = 0; rs < rows_signed; ++rs) {
        const auto r = static_cast<std::size_t>(rs);
        // Line integrals for all bins of this row at once: [view][col][bin].
        std::vector<double> integrals(nv * nc * nk, 0.0);
        const float* slice = vox.data() + r * nc * nc * nk;
        for (std::size_t pix = 0; pix < nc * nc; ++pix) {
            const float* spectrum = slice + pix * nk;
            if (std::all_of(spectrum, spectrum + nk, [](float v) { return v == 0.0f; })) {
                continue;
            }
            for (const auto& t : projector.column(pix)) {
                double* out = integrals.data() + static_cast<std::size_t>(t.measurement) * nk;
                const double w = t.weight;
                for (std::size_t k = 0; k < nk; ++k) {
                    out[k] += w * static_cast<double>(spectrum[k]);
                }
            }
        }
        for (std::size_t v = 0; v < nv; ++v) {
            for (std::size_t c = 0; c < nc; ++c) {
                for (std::size_t k = 0; k < nk; ++k) {
                    const double ell = integrals[(v * nc + c) * nk + k];
                    finite = finite && std::isfinite(ell);
                    const double expected = flux * std::exp(-ell);
                    double y = expected;
                    if (opts.poisson_noise) {
                        auto rng = CounterRng::for_index(seed, v, r, c, k);
                        y = static_cast<double>(rng.poisson(expected));
                    }
                    counts[((v * nr + r) * nc + c) * nk + k] = static_cast<float>(y);
                }
            }
        }
        for (std::size_t c = 0; c < nc; ++c) {
            for (std::size_t k = 0; k < nk; ++k) {
                double y = flux;
                if (opts.poisson_noise) {
                    auto rng = CounterRng::for_index(seed, nv, r, c, k);
                    y = static_cast<double>(rng.poisson(flux));
                }
                open[(r * nc + c) * nk + k] = static_cast<float>(y);
            }
        }
    }
    require(finite, "simulated line integrals are not finite");
    return RawScan(geometry, axis, std::move(counts), std::move(open));
}

namespace {

BenchmarkPhantom make_phantom(std::size_t size, std::size_t slices, std::size_t views, std::size_t bins) {
    const double flight_path = 16.0;
    const ToFConverter converter(flight_path);
    const double tof_min = angstrom(1.0) / converter.factor();
    const double tof_max = angstrom(5.0) / converter.factor();

    const double s = static_cast<double>(size) / 64.0;
    auto slice_range = [&](double lo, double hi) {
        const auto b = static_cast<std::size_t>(std::floor(lo * static_cast<double>(slices)));
        const auto e = static_cast<std::size_t>(std::ceil(hi * static_cast<double>(slices)));
        return std::pair{std::min(b, slices - 1), std::max(std::min(e, slices), b + 1)};
    };
    const auto [b1, e1] = slice_range(0.0, 1.0);
    const auto [b2, e2] = slice_range(0.125, 0.875);
    const auto [b3, e3] = slice_range(0.25, 0.8);

    PhantomSpec spec;
    spec.image_size = size;
    spec.num_slices = slices;
    spec.flux = 200.0;
    spec.seed = 20240917;
    spec.materials = benchmark_materials();
    spec.shapes = {
        {ShapeKind::Ellipse, 0.0, 0.0, 26.0 * s, 22.0 * s, 0.0, b1, e1, 0},
        {ShapeKind::Ellipse, -9.0 * s, -5.0 * s, 9.0 * s, 9.0 * s, 0.0, b2, e2, 1},
        {ShapeKind::Rectangle, 10.0 * s, 8.0 * s, 6.0 * s, 4.5 * s, 0.4, b3, e3, 2},
    };
    spec.validate();
    return BenchmarkPhantom{spec, SpectralAxis::uniform(bins, tof_min, tof_max, converter),
                            ScanGeometry::uniform(views, slices, size, flight_path)};
}

}  // namespace

BenchmarkPhantom default_benchmark_phantom() { return make_phantom(64, 16, 32, 256); }

BenchmarkPhantom tiny_benchmark_phantom() { return make_phantom(32, 4, 16, 32); }

}  // namespace hsnct

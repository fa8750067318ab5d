#include "hsnct/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsnct/errors.hpp"

namespace hsnct {

double tof_to_wavelength(const ToFConverter& converter, double dt) {
    require(std::isfinite(dt) && dt >= 0.0, "time of flight must be finite and >= 0");
    return (converter.planck_h() / converter.neutron_mass()) * (dt / converter.flight_path());
}

HyperspectralSinogram normalize(const RawScan& scan, const NormalizationOptions& opts) {
    require(std::isfinite(opts.count_floor) && opts.count_floor > 0.0, "count floor must be positive");
    const auto& g = scan.geometry();
    const std::size_t nk = scan.axis().num_bins();
    const std::size_t pixels = g.num_rows() * g.num_cols();
    const auto counts = scan.counts();
    const auto open = scan.open_beam();
    require(open.size() == pixels * nk, "open-beam shape does not match the scan");

    std::vector<float> p(counts.size());
    const double floor = opts.count_floor;
    const auto views = static_cast<std::ptrdiff_t>(g.num_views());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t v = 0; v < views; ++v) {
        const std::size_t base = static_cast<std::size_t>(v) * pixels * nk;
        for (std::size_t i = 0; i < pixels * nk; ++i) {
            const double y = std::max(static_cast<double>(counts[base + i]), floor);
            const double y0 = std::max(static_cast<double>(open[i]), floor);
            double value = -std::log(y / y0);
            if (opts.clamp_negative && value < 0.0) {
                value = 0.0;
            }
            p[base + i] = static_cast<float>(value);
        }
    }
    return HyperspectralSinogram(g, scan.axis(), std::move(p));
}

HyperspectralSinogram spectral_rebin(const HyperspectralSinogram& sinogram, std::size_t factor) {
    const std::size_t nk = sinogram.num_bins();
    require(factor >= 1, "rebin factor must be >= 1");
    require(nk % factor == 0,
            "rebin factor " + std::to_string(factor) + " does not divide N_k = " + std::to_string(nk));
    if (factor == 1) {
        return sinogram;
    }
    const std::size_t out_bins = nk / factor;
    const std::size_t np = sinogram.num_measurements();
    const auto in = sinogram.values();
    std::vector<float> out(np * out_bins);
    for (std::size_t m = 0; m < np; ++m) {
        for (std::size_t k = 0; k < out_bins; ++k) {
            double sum = 0.0;
            for (std::size_t j = 0; j < factor; ++j) {
                sum += in[m * nk + k * factor + j];
            }
            out[m * out_bins + k] = static_cast<float>(sum / static_cast<double>(factor));
        }
    }
    const auto edges = sinogram.axis().tof_edges();
    std::vector<double> new_edges(out_bins + 1);
    for (std::size_t k = 0; k <= out_bins; ++k) {
        new_edges[k] = edges[k * factor];
    }
    SpectralAxis axis(std::move(new_edges), ToFConverter(sinogram.axis().flight_path()));
    return HyperspectralSinogram(sinogram.geometry(), std::move(axis), std::move(out));
}

}  // namespace hsnct

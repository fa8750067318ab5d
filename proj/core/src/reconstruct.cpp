#include "hsnct/reconstruct.hpp"

#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <string>

#include "hsnct/errors.hpp"

namespace hsnct {
namespace {

// Gathers detector row `row` of channel `channel` as an angle x bin sinogram.
void gather_slice(std::span<const float> data, std::size_t channels, const ScanGeometry& g, std::size_t row,
                  std::size_t channel, std::span<double> out) {
    const std::size_t rows = g.num_rows();
    const std::size_t cols = g.num_cols();
    for (std::size_t v = 0; v < g.num_views(); ++v) {
        const std::size_t base = ((v * rows + row) * cols) * channels + channel;
        for (std::size_t b = 0; b < cols; ++b) {
            out[v * cols + b] = data[base + b * channels];
        }
    }
}

std::vector<double> shared_weights(std::span<const float> data, std::size_t channels, const ScanGeometry& g,
                                   std::size_t row) {
    const std::size_t rows = g.num_rows();
    const std::size_t cols = g.num_cols();
    std::vector<double> w(g.num_views() * cols);
    for (std::size_t v = 0; v < g.num_views(); ++v) {
        for (std::size_t b = 0; b < cols; ++b) {
            const std::size_t base = ((v * rows + row) * cols + b) * channels;
            double total = 0.0;
            for (std::size_t c = 0; c < channels; ++c) {
                total += data[base + c];
            }
            w[v * cols + b] = std::exp(-total);
        }
    }
    return w;
}

}  // namespace

VolumeStack reconstruct_stack(std::span<const float> data, std::size_t channels, const ScanGeometry& geometry,
                              const ReconOptions& opts, ReconStats* stats) {
    require(channels >= 1, "reconstruction needs at least one channel");
    require(data.size() == geometry.num_measurements() * channels,
            "sinogram stack has " + std::to_string(data.size()) + " entries, geometry and " +
                std::to_string(channels) + " channels require " +
                std::to_string(geometry.num_measurements() * channels));
    require(opts.threads >= 1, "thread count must be >= 1");
    if (opts.engine == ReconEngine::Mbir) {
        opts.mbir.validate();
    }

    const SliceGeometry slice_geometry = SliceGeometry::from_scan(geometry);
    const std::size_t rows = geometry.num_rows();
    const std::size_t n = geometry.num_cols();
    const std::size_t pixels = n * n;

    std::unique_ptr<FbpReconstructor> fbp;
    std::unique_ptr<MbirReconstructor> mbir;
    if (opts.engine == ReconEngine::Fbp) {
        fbp = std::make_unique<FbpReconstructor>(slice_geometry, opts.filter);
    } else {
        mbir = std::make_unique<MbirReconstructor>(slice_geometry);
    }

    std::vector<std::vector<double>> row_weights;
    if (opts.engine == ReconEngine::Mbir && opts.weighting == StackWeighting::SharedTransmission) {
        row_weights.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            row_weights[r] = shared_weights(data, channels, geometry, r);
        }
    }

    std::vector<float> voxels(rows * pixels * channels);

    auto run_task = [&](std::size_t channel, std::size_t row) -> std::size_t {
        std::vector<double> sinogram(slice_geometry.sinogram_size());
        gather_slice(data, channels, geometry, row, channel, sinogram);

        std::vector<double> image;
        std::size_t iterations = 0;
        if (fbp) {
            image = fbp->reconstruct(sinogram);
        } else {
            MbirOptions local = opts.mbir;
            switch (opts.weighting) {
                case StackWeighting::PerChannelTransmission:
                    local.noise_weights.clear();
                    break;
                case StackWeighting::SharedTransmission:
                    local.noise_weights = row_weights[row];
                    break;
                case StackWeighting::Uniform:
                    local.noise_weights.assign(sinogram.size(), 1.0);
                    break;
            }
            MbirResult result = mbir->reconstruct(sinogram, local);
            iterations = result.iterations;
            image = std::move(result.image);
        }

        float* out = voxels.data() + row * pixels * channels;
        for (std::size_t pix = 0; pix < pixels; ++pix) {
            out[pix * channels + channel] = static_cast<float>(image[pix]);
        }
        return iterations;
    };

    const auto tasks = static_cast<std::ptrdiff_t>(rows * channels);
    std::size_t total_iterations = 0;
    std::exception_ptr failure;
    std::mutex failure_mutex;

#pragma omp parallel for num_threads(opts.threads) schedule(dynamic, 1) reduction(+ : total_iterations)
    for (std::ptrdiff_t task = 0; task < tasks; ++task) {
        try {
            total_iterations += run_task(static_cast<std::size_t>(task) / rows, static_cast<std::size_t>(task) % rows);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    if (stats != nullptr) {
        stats->reconstructions = rows * channels;
        stats->mbir_iterations = total_iterations;
    }
    return VolumeStack(rows, n, channels, std::move(voxels), geometry.pixel_pitch());
}

VolumeStack reconstruct_stack(const HyperspectralSinogram& sinogram, const ReconOptions& opts, ReconStats* stats) {
    return reconstruct_stack(sinogram.values(), sinogram.num_bins(), sinogram.geometry(), opts, stats);
}

VolumeStack reconstruct_stack(const SubspaceSinogram& sinogram, const ReconOptions& opts, ReconStats* stats) {
    return reconstruct_stack(sinogram.coeffs(), sinogram.rank(), sinogram.geometry(), opts, stats);
}

}  // namespace hsnct

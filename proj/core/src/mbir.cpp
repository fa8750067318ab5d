#include "hsnct/mbir.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hsnct/errors.hpp"
#include "hsnct/random.hpp"

namespace hsnct {
namespace {

struct NeighborOffset {
    int dy;
    int dx;
    double weight;
};

// Each unordered pair appears once in the objective via these offsets.
constexpr double kDiagonal = 0.70710678118654752440;
constexpr std::array<NeighborOffset, 4> kForwardOffsets{{
    {0, 1, 1.0},
    {1, 0, 1.0},
    {1, 1, kDiagonal},
    {1, -1, kDiagonal},
}};

constexpr std::array<NeighborOffset, 8> kAllOffsets{{
    {0, 1, 1.0},
    {1, 0, 1.0},
    {0, -1, 1.0},
    {-1, 0, 1.0},
    {1, 1, kDiagonal},
    {1, -1, kDiagonal},
    {-1, 1, kDiagonal},
    {-1, -1, kDiagonal},
}};

double penalty(double t, const MbirOptions& opts) {
    if (opts.prior == MbirPrior::Quadratic) {
        return 0.5 * t * t;
    }
    const double a = std::fabs(t);
    return a <= opts.huber_delta ? 0.5 * t * t : opts.huber_delta * a - 0.5 * opts.huber_delta * opts.huber_delta;
}

// Curvature of the tangent quadratic majorizer of the penalty at t.
double surrogate_curvature(double t, const MbirOptions& opts) {
    if (opts.prior == MbirPrior::Quadratic) {
        return 1.0;
    }
    const double a = std::fabs(t);
    return a <= opts.huber_delta ? 1.0 : opts.huber_delta / a;
}

double prior_value(std::span<const double> image, std::size_t n, const MbirOptions& opts) {
    double total = 0.0;
    const auto size = static_cast<int>(n);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double xi = image[static_cast<std::size_t>(y * size + x)];
            for (const auto& off : kForwardOffsets) {
                const int ny = y + off.dy;
                const int nx = x + off.dx;
                if (ny < 0 || ny >= size || nx < 0 || nx >= size) {
                    continue;
                }
                total += off.weight * penalty(xi - image[static_cast<std::size_t>(ny * size + nx)], opts);
            }
        }
    }
    return total;
}

std::vector<double> default_weights(std::span<const double> sinogram) {
    std::vector<double> w(sinogram.size());
    std::transform(sinogram.begin(), sinogram.end(), w.begin(), [](double s) { return std::exp(-s); });
    return w;
}

}  // namespace

void MbirOptions::validate() const {
    require(std::isfinite(beta) && beta >= 0.0, "MBIR beta must be >= 0");
    require(std::isfinite(huber_delta) && huber_delta > 0.0, "Huber delta must be positive");
    require(max_iters >= 1, "MBIR max_iters must be >= 1");
    require(std::isfinite(rel_tol) && rel_tol >= 0.0, "MBIR rel_tol must be >= 0");
    for (double w : noise_weights) {
        require(std::isfinite(w) && w >= 0.0, "MBIR noise weights must be finite and >= 0");
    }
}

MbirReconstructor::MbirReconstructor(SliceGeometry geometry)
    : MbirReconstructor(std::make_shared<const ParallelBeamProjector>(std::move(geometry))) {}

MbirReconstructor::MbirReconstructor(std::shared_ptr<const ParallelBeamProjector> projector)
    : projector_(std::move(projector)) {
    const std::size_t pixels = projector_->geometry().num_pixels();
    visit_order_.resize(pixels);
    std::iota(visit_order_.begin(), visit_order_.end(), std::size_t{0});
    CounterRng rng(0x4d424952ull, pixels);  // "MBIR"
    for (std::size_t i = pixels; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(visit_order_[i - 1], visit_order_[j]);
    }
}

double MbirReconstructor::objective(std::span<const double> image, std::span<const double> sinogram,
                                    std::span<const double> weights, const MbirOptions& opts) const {
    std::vector<double> projected(sinogram.size());
    projector_->forward(image, projected);
    double data = 0.0;
    for (std::size_t m = 0; m < sinogram.size(); ++m) {
        const double r = projected[m] - sinogram[m];
        data += weights[m] * r * r;
    }
    return 0.5 * data + opts.beta * prior_value(image, geometry().image_size(), opts);
}

MbirResult MbirReconstructor::reconstruct(std::span<const double> sinogram, const MbirOptions& opts,
                                          std::span<const double> initial) const {
    opts.validate();
    const auto& g = geometry();
    require(sinogram.size() == g.sinogram_size(), "sinogram size does not match the MBIR geometry");
    for (double v : sinogram) {
        require(std::isfinite(v), "MBIR input sinogram must be finite");
    }
    std::vector<double> weights = opts.noise_weights.empty()
                                      ? default_weights(sinogram)
                                      : std::vector<double>(opts.noise_weights.begin(), opts.noise_weights.end());
    require(weights.size() == sinogram.size(), "noise weights must have one entry per measurement");
    require(std::any_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; }),
            "MBIR noise weights are all zero");

    const std::size_t n = g.image_size();
    const auto size = static_cast<int>(n);
    MbirResult result;
    result.image.assign(g.num_pixels(), 0.0);
    if (!initial.empty()) {
        require(initial.size() == g.num_pixels(), "initial image size does not match the MBIR geometry");
        std::copy(initial.begin(), initial.end(), result.image.begin());
        if (opts.nonneg_constraint) {
            for (double& v : result.image) {
                v = std::max(v, 0.0);
            }
        }
    }
    auto& x = result.image;

    // error = y - A x
    std::vector<double> error(sinogram.size());
    projector_->forward(x, error);
    for (std::size_t m = 0; m < error.size(); ++m) {
        error[m] = sinogram[m] - error[m];
    }

    // Data curvature per pixel does not change between sweeps.
    std::vector<double> curvature(g.num_pixels(), 0.0);
    for (std::size_t pix = 0; pix < curvature.size(); ++pix) {
        double acc = 0.0;
        for (const auto& t : projector_->column(pix)) {
            const double a = t.weight;
            acc += a * a * weights[t.measurement];
        }
        curvature[pix] = acc;
    }

    auto current_objective = [&]() {
        double data = 0.0;
        for (std::size_t m = 0; m < error.size(); ++m) {
            data += weights[m] * error[m] * error[m];
        }
        return 0.5 * data + opts.beta * prior_value(x, n, opts);
    };

    result.objective_trace.push_back(current_objective());
    if (result.objective_trace.back() == 0.0) {
        return result;
    }

    for (std::size_t iter = 1; iter <= opts.max_iters; ++iter) {
        for (std::size_t pix : visit_order_) {
            const int py = static_cast<int>(pix / n);
            const int px = static_cast<int>(pix % n);
            const double xi = x[pix];

            double gradient = 0.0;
            for (const auto& t : projector_->column(pix)) {
                gradient -= static_cast<double>(t.weight) * weights[t.measurement] * error[t.measurement];
            }
            double numer = curvature[pix] * xi - gradient;
            double denom = curvature[pix];
            if (opts.beta > 0.0) {
                for (const auto& off : kAllOffsets) {
                    const int ny = py + off.dy;
                    const int nx = px + off.dx;
                    if (ny < 0 || ny >= size || nx < 0 || nx >= size) {
                        continue;
                    }
                    const double xj = x[static_cast<std::size_t>(ny * size + nx)];
                    const double b = opts.beta * off.weight * surrogate_curvature(xi - xj, opts);
                    numer += b * xj;
                    denom += b;
                }
            }
            if (!(denom > 0.0)) {
                continue;
            }
            double updated = numer / denom;
            if (opts.nonneg_constraint && updated < 0.0) {
                updated = 0.0;
            }
            const double delta = updated - xi;
            if (delta == 0.0) {
                continue;
            }
            x[pix] = updated;
            for (const auto& t : projector_->column(pix)) {
                error[t.measurement] -= static_cast<double>(t.weight) * delta;
            }
        }

        const double objective = current_objective();
        const double previous = result.objective_trace.back();
        result.objective_trace.push_back(objective);
        result.iterations = iter;
        if (objective == 0.0 || (previous - objective) <= opts.rel_tol * previous) {
            break;
        }
    }
    return result;
}

MbirResult mbir_reconstruct(std::span<const double> sinogram, const SliceGeometry& geometry, const MbirOptions& opts) {
    const MbirReconstructor mbir(geometry);
    return mbir.reconstruct(sinogram, opts);
}

}  // namespace hsnct

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hsnct/projector.hpp"

namespace hsnct {

enum class MbirPrior {
    Quadratic,
    Huber,
};

struct MbirOptions {
    MbirPrior prior = MbirPrior::Quadratic;
    double beta = 1.0;
    double huber_delta = 0.1;
    /// Per-measurement weights; empty means exp(-sinogram).
    std::vector<double> noise_weights;
    std::size_t max_iters = 100;
    double rel_tol = 1e-5;
    bool nonneg_constraint = true;

    void validate() const;
};

struct MbirResult {
    std::vector<double> image;
    /// Objective at the initial image (entry 0) and after every sweep.
    std::vector<double> objective_trace;
    std::size_t iterations = 0;
};

/// Penalized weighted least squares
///   1/2 || W^(1/2) (A x - y) ||^2 + beta * sum_{i~j} w_ij rho(x_i - x_j)
/// over an 8-neighbor stencil (w = 1 for edges, 1/sqrt(2) for diagonals),
/// solved by iterative coordinate descent. Each pixel update exactly
/// minimizes a quadratic majorizer (Huber uses its half-quadratic tangent
/// surrogate), so the objective never increases. Pixels are visited in a
/// fixed pseudo-random order that depends only on the image size.
class MbirReconstructor {
public:
    explicit MbirReconstructor(SliceGeometry geometry);
    explicit MbirReconstructor(std::shared_ptr<const ParallelBeamProjector> projector);

    const SliceGeometry& geometry() const noexcept { return projector_->geometry(); }
    const ParallelBeamProjector& projector() const noexcept { return *projector_; }

    MbirResult reconstruct(std::span<const double> sinogram, const MbirOptions& opts,
                           std::span<const double> initial = {}) const;

    double objective(std::span<const double> image, std::span<const double> sinogram,
                     std::span<const double> weights, const MbirOptions& opts) const;

private:
    std::shared_ptr<const ParallelBeamProjector> projector_;
    std::vector<std::size_t> visit_order_;
};

MbirResult mbir_reconstruct(std::span<const double> sinogram, const SliceGeometry& geometry,
                            const MbirOptions& opts);

}  // namespace hsnct

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hsnct/arrays.hpp"

namespace hsnct {

enum class NmfInit {
    SeededUniform,  // U(0,1] * sqrt(mean(p) / N_s)
    Nndsvd,         // non-negative double SVD, deterministic
};

enum class NmfUpdateRule {
    FrobeniusMultiplicative,
};

struct NmfOptions {
    std::size_t rank = 4;
    std::size_t max_iters = 500;
    double rel_tol = 1e-6;
    std::uint64_t seed = 0;
    NmfInit init = NmfInit::SeededUniform;
    NmfUpdateRule update_rule = NmfUpdateRule::FrobeniusMultiplicative;
    int threads = 1;

    void validate(std::size_t num_rows, std::size_t num_cols) const;
};

struct FactorizationReport {
    std::size_t iterations_run = 0;
    /// ||p - V D^T||_F^2 after initialization (entry 0) and after every sweep.
    std::vector<double> objective_trace;
    double residual_energy = 0.0;  // ||eps||_F^2 / ||p||_F^2
    bool converged = false;
    /// Sweep indices at which a collapsed basis column was re-seeded; the
    /// objective may rise at these points.
    std::vector<std::size_t> reseed_iterations;
    /// Set when a column collapsed a second time and was left at zero.
    bool degenerate_column = false;
};

struct Factorization {
    SubspaceSinogram coefficients;
    SpectralBasis basis;
    FactorizationReport report;
};

/// Frobenius-norm NMF p ~= V^s (D^s)^T by alternating multiplicative updates.
///
/// Columns are rescaled so every basis column has unit mean over the bins,
/// which keeps V^s in attenuation units, then sorted by descending L2 norm of
/// the V^s column (ties: lexicographically larger basis column first).
/// Row blocks of the reductions have a fixed partition, so the result does not
/// depend on `threads`.
Factorization nmf_factorize(const HyperspectralSinogram& p, const NmfOptions& opts);

struct RankScanEntry {
    std::size_t rank;
    double residual_energy;
};

std::vector<RankScanEntry> rank_scan(const HyperspectralSinogram& p, std::span<const std::size_t> ranks,
                                     const NmfOptions& opts);

struct SubspaceResidual {
    std::vector<float> residual;  // N_p x N_k
    double residual_energy;       // ||residual||^2 / ||p||^2
};

SubspaceResidual subspace_residual(const HyperspectralSinogram& p, const SubspaceSinogram& v,
                                   const SpectralBasis& d);

/// Per-measurement least-squares coefficients against a fixed basis.
/// With `nonneg` the coefficients are refined by projected multiplicative updates.
SubspaceSinogram project_onto_basis(const HyperspectralSinogram& p, const SpectralBasis& d, bool nonneg);

/// x^h = x^s (D^s)^T per voxel. No clamping.
VolumeStack expand(const VolumeStack& subspace_volume, const SpectralBasis& d);

}  // namespace hsnct

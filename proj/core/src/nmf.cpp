#include "hsnct/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "hsnct/errors.hpp"
#include "hsnct/random.hpp"

namespace hsnct {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;

// Fixed row partition for every reduction over measurements. Results do not
// depend on how blocks are assigned to threads.
constexpr std::size_t kRowBlock = 512;

std::size_t block_count(std::size_t rows) { return (rows + kRowBlock - 1) / kRowBlock; }

RowMatrix to_matrix(std::span<const float> values, std::size_t rows, std::size_t cols) {
    RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows * cols; ++i) {
        m.data()[i] = values[i];
    }
    return m;
}

struct BlockRange {
    Eigen::Index begin;
    Eigen::Index size;
};

BlockRange block_range(std::size_t b, std::size_t rows) {
    const std::size_t begin = b * kRowBlock;
    return {static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(std::min(kRowBlock, rows - begin))};
}

// Sum of per-block products P_b^T V_b (or V_b^T V_b), accumulated in block order.
template <typename BlockFn>
Matrix blocked_sum(std::size_t rows, Eigen::Index out_rows, Eigen::Index out_cols, int threads, BlockFn&& fn) {
    const std::size_t nb = block_count(rows);
    std::vector<Matrix> partial(nb);
    const auto nb_signed = static_cast<std::ptrdiff_t>(nb);
#pragma omp parallel for num_threads(threads) schedule(static)
    for (std::ptrdiff_t b = 0; b < nb_signed; ++b) {
        partial[static_cast<std::size_t>(b)] = fn(block_range(static_cast<std::size_t>(b), rows));
    }
    Matrix total = Matrix::Zero(out_rows, out_cols);
    for (const auto& m : partial) {
        total += m;
    }
    return total;
}

double squared_residual(const RowMatrix& p, const RowMatrix& v, const Matrix& d, int threads) {
    const std::size_t rows = static_cast<std::size_t>(p.rows());
    const std::size_t nb = block_count(rows);
    std::vector<double> partial(nb, 0.0);
    const auto nb_signed = static_cast<std::ptrdiff_t>(nb);
#pragma omp parallel for num_threads(threads) schedule(static)
    for (std::ptrdiff_t b = 0; b < nb_signed; ++b) {
        const auto r = block_range(static_cast<std::size_t>(b), rows);
        const RowMatrix approx = v.middleRows(r.begin, r.size) * d.transpose();
        partial[static_cast<std::size_t>(b)] = (p.middleRows(r.begin, r.size) - approx).squaredNorm();
    }
    return std::accumulate(partial.begin(), partial.end(), 0.0);
}

void multiplicative_step(double& x, double numer, double denom) {
    x = denom > 0.0 ? x * (numer / denom) : 0.0;
}

void init_seeded_uniform(const RowMatrix& p, std::size_t rank, std::uint64_t seed, RowMatrix& v, Matrix& d) {
    const double mean = p.size() > 0 ? p.mean() : 0.0;
    const double scale = std::sqrt(std::max(mean, 0.0) / static_cast<double>(rank));
    CounterRng rng_v(seed, 0x56);  // 'V'
    CounterRng rng_d(seed, 0x44);  // 'D'
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v.data()[i] = rng_v.uniform_open_low() * scale;
    }
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        for (Eigen::Index k = 0; k < d.rows(); ++k) {
            d(k, j) = rng_d.uniform_open_low() * scale;
        }
    }
}

// NNDSVD with zeros replaced by mean(p) (the "NNDSVDa" variant), so that
// multiplicative updates can still move every entry. The leading singular
// pairs come from the eigendecomposition of p^T p (N_k x N_k).
void init_nndsvd(const RowMatrix& p, std::size_t rank, int threads, RowMatrix& v, Matrix& d) {
    const auto nk = p.cols();
    const std::size_t rows = static_cast<std::size_t>(p.rows());
    const Matrix gram = blocked_sum(rows, nk, nk, threads, [&](BlockRange r) -> Matrix {
        const auto block = p.middleRows(r.begin, r.size);
        return block.transpose() * block;
    });
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const double mean = p.mean();

    for (std::size_t j = 0; j < rank; ++j) {
        const Eigen::Index col = nk - 1 - static_cast<Eigen::Index>(j);  // eigenvalues ascend
        const double sigma = std::sqrt(std::max(eig.eigenvalues()(col), 0.0));
        const Eigen::VectorXd w = eig.eigenvectors().col(col);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(p.rows());
        if (sigma > 0.0) {
            u = (p * w) / sigma;
        }
        Eigen::VectorXd uu;
        Eigen::VectorXd ww;
        if (j == 0) {
            uu = u.cwiseAbs();
            ww = w.cwiseAbs();
        } else {
            const Eigen::VectorXd up = u.cwiseMax(0.0), un = (-u).cwiseMax(0.0);
            const Eigen::VectorXd wp = w.cwiseMax(0.0), wn = (-w).cwiseMax(0.0);
            const double mp = up.norm() * wp.norm();
            const double mn = un.norm() * wn.norm();
            if (mp >= mn) {
                uu = up.norm() > 0 ? Eigen::VectorXd(up / up.norm()) : up;
                ww = wp.norm() > 0 ? Eigen::VectorXd(wp / wp.norm()) : wp;
                uu *= std::sqrt(mp);
                ww *= std::sqrt(mp);
            } else {
                uu = un.norm() > 0 ? Eigen::VectorXd(un / un.norm()) : un;
                ww = wn.norm() > 0 ? Eigen::VectorXd(wn / wn.norm()) : wn;
                uu *= std::sqrt(mn);
                ww *= std::sqrt(mn);
            }
        }
        const double s = std::sqrt(sigma);
        uu *= s;
        ww *= s;
        v.col(static_cast<Eigen::Index>(j)) = uu;
        d.col(static_cast<Eigen::Index>(j)) = ww;
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v.data()[i] > 0.0)) {
            v.data()[i] = mean;
        }
    }
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!(d.data()[i] > 0.0)) {
            d.data()[i] = mean;
        }
    }
}

// Spectrum (row of p) with the largest squared residual under the current model.
Eigen::Index largest_residual_row(const RowMatrix& p, const RowMatrix& v, const Matrix& d) {
    Eigen::Index best = 0;
    double best_norm = -1.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double r = (p.row(i) - v.row(i) * d.transpose()).squaredNorm();
        if (r > best_norm) {
            best_norm = r;
            best = i;
        }
    }
    return best;
}

bool column_is_zero(const Matrix& d, Eigen::Index s) { return !(d.col(s).maxCoeff() > 0.0); }

void reseed_column(const RowMatrix& p, RowMatrix& v, Matrix& d, Eigen::Index s) {
    const Eigen::Index row = largest_residual_row(p, v, d);
    Eigen::VectorXd residual = (p.row(row) - v.row(row) * d.transpose()).transpose();
    Eigen::VectorXd spectrum = residual.cwiseMax(0.0);
    if (!(spectrum.maxCoeff() > 0.0)) {
        spectrum = p.row(row).transpose().cwiseMax(0.0);
    }
    const double energy = spectrum.squaredNorm();
    if (!(energy > 0.0)) {
        return;
    }
    d.col(s) = spectrum;
    // Least-squares coefficient of each row on the new spectrum, clipped at 0.
    v.col(s) = ((p * spectrum) / energy).cwiseMax(0.0);
}

// Unit-mean basis columns, then descending ||V_s||, ties by larger basis column.
void canonicalize(RowMatrix& v, Matrix& d, bool& degenerate) {
    const Eigen::Index rank = d.cols();
    for (Eigen::Index s = 0; s < rank; ++s) {
        const double mean = d.col(s).mean();
        if (mean > 0.0) {
            d.col(s) /= mean;
            v.col(s) *= mean;
        } else {
            // Collapsed column: it contributes nothing to V D^T. Give it a flat
            // unit-mean spectrum and zero coefficients so the basis stays valid.
            degenerate = true;
            d.col(s).setOnes();
            v.col(s).setZero();
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rank));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> norms(order.size());
    for (Eigen::Index s = 0; s < rank; ++s) {
        norms[static_cast<std::size_t>(s)] = v.col(s).norm();
    }
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double na = norms[static_cast<std::size_t>(a)];
        const double nb = norms[static_cast<std::size_t>(b)];
        if (na != nb) {
            return na > nb;
        }
        for (Eigen::Index k = 0; k < d.rows(); ++k) {
            if (d(k, a) != d(k, b)) {
                return d(k, a) > d(k, b);
            }
        }
        return false;
    });
    RowMatrix v_sorted(v.rows(), v.cols());
    Matrix d_sorted(d.rows(), d.cols());
    for (Eigen::Index s = 0; s < rank; ++s) {
        v_sorted.col(s) = v.col(order[static_cast<std::size_t>(s)]);
        d_sorted.col(s) = d.col(order[static_cast<std::size_t>(s)]);
    }
    v = std::move(v_sorted);
    d = std::move(d_sorted);
}

}  // namespace

void NmfOptions::validate(std::size_t num_rows, std::size_t num_cols) const {
    require(rank >= 1, "NMF rank N_s must be >= 1");
    require(rank <= std::min(num_rows, num_cols),
            "NMF rank " + std::to_string(rank) + " exceeds min(N_p, N_k) = " +
                std::to_string(std::min(num_rows, num_cols)));
    require(max_iters >= 1, "NMF max_iters must be >= 1");
    require(std::isfinite(rel_tol) && rel_tol > 0.0, "NMF rel_tol must be positive");
    require(threads >= 1, "thread count must be >= 1");
}

Factorization nmf_factorize(const HyperspectralSinogram& sinogram, const NmfOptions& opts) {
    const std::size_t np = sinogram.num_measurements();
    const std::size_t nk = sinogram.num_bins();
    opts.validate(np, nk);
    require(sinogram.is_nonnegative(), "NMF input has negative entries; normalize with clamping enabled");

    const int threads = opts.threads;
    const auto rank = static_cast<Eigen::Index>(opts.rank);
    const RowMatrix p = to_matrix(sinogram.values(), np, nk);
    const double p_energy = p.squaredNorm();

    RowMatrix v(static_cast<Eigen::Index>(np), rank);
    Matrix d(static_cast<Eigen::Index>(nk), rank);
    switch (opts.init) {
        case NmfInit::SeededUniform:
            init_seeded_uniform(p, opts.rank, opts.seed, v, d);
            break;
        case NmfInit::Nndsvd:
            init_nndsvd(p, opts.rank, threads, v, d);
            break;
    }

    FactorizationReport report;
    report.objective_trace.push_back(squared_residual(p, v, d, threads));
    std::vector<int> reseeds(static_cast<std::size_t>(rank), 0);

    const auto nb_signed = static_cast<std::ptrdiff_t>(block_count(np));
    for (std::size_t iter = 1; iter <= opts.max_iters; ++iter) {
        // V <- V .* (P D) ./ (V D^T D); rows are independent.
        const Matrix dtd = d.transpose() * d;
#pragma omp parallel for num_threads(threads) schedule(static)
        for (std::ptrdiff_t b = 0; b < nb_signed; ++b) {
            const auto r = block_range(static_cast<std::size_t>(b), np);
            const RowMatrix numer = p.middleRows(r.begin, r.size) * d;
            const RowMatrix denom = v.middleRows(r.begin, r.size) * dtd;
            for (Eigen::Index i = 0; i < r.size; ++i) {
                for (Eigen::Index s = 0; s < rank; ++s) {
                    multiplicative_step(v(r.begin + i, s), numer(i, s), denom(i, s));
                }
            }
        }

        // D <- D .* (P^T V) ./ (D V^T V); reductions over measurements.
        const Matrix ptv = blocked_sum(np, static_cast<Eigen::Index>(nk), rank, threads, [&](BlockRange r) -> Matrix {
            return p.middleRows(r.begin, r.size).transpose() * v.middleRows(r.begin, r.size);
        });
        const Matrix vtv = blocked_sum(np, rank, rank, threads, [&](BlockRange r) -> Matrix {
            const auto block = v.middleRows(r.begin, r.size);
            return block.transpose() * block;
        });
        const Matrix denom = d * vtv;
        for (Eigen::Index k = 0; k < d.rows(); ++k) {
            for (Eigen::Index s = 0; s < rank; ++s) {
                multiplicative_step(d(k, s), ptv(k, s), denom(k, s));
            }
        }

        if (p_energy > 0.0) {
            for (Eigen::Index s = 0; s < rank; ++s) {
                if (!column_is_zero(d, s)) {
                    continue;
                }
                auto& count = reseeds[static_cast<std::size_t>(s)];
                if (count == 0) {
                    reseed_column(p, v, d, s);
                    report.reseed_iterations.push_back(iter);
                }
                if (count == 1) {
                    report.degenerate_column = true;
                }
                count = std::min(count + 1, 2);
            }
        }

        const double objective = squared_residual(p, v, d, threads);
        const double previous = report.objective_trace.back();
        report.objective_trace.push_back(objective);
        report.iterations_run = iter;

        if (objective == 0.0 || (previous > 0.0 && (previous - objective) / previous < opts.rel_tol &&
                                 std::find(report.reseed_iterations.begin(), report.reseed_iterations.end(),
                                           iter) == report.reseed_iterations.end())) {
            report.converged = true;
            break;
        }
    }

    canonicalize(v, d, report.degenerate_column);

    std::vector<float> v_out(np * opts.rank);
    std::vector<float> d_out(nk * opts.rank);
    for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t s = 0; s < opts.rank; ++s) {
            v_out[i * opts.rank + s] = static_cast<float>(v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)));
        }
    }
    for (std::size_t k = 0; k < nk; ++k) {
        for (std::size_t s = 0; s < opts.rank; ++s) {
            d_out[k * opts.rank + s] = static_cast<float>(d(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)));
        }
    }

    SubspaceSinogram coefficients(sinogram.geometry(), opts.rank, std::move(v_out));
    SpectralBasis basis(sinogram.axis(), opts.rank, std::move(d_out));
    report.residual_energy = subspace_residual(sinogram, coefficients, basis).residual_energy;
    return Factorization{std::move(coefficients), std::move(basis), std::move(report)};
}

std::vector<RankScanEntry> rank_scan(const HyperspectralSinogram& p, std::span<const std::size_t> ranks,
                                     const NmfOptions& opts) {
    require(!ranks.empty(), "rank scan needs at least one rank");
    for (std::size_t r : ranks) {
        NmfOptions o = opts;
        o.rank = r;
        o.validate(p.num_measurements(), p.num_bins());
    }
    std::vector<RankScanEntry> out;
    out.reserve(ranks.size());
    for (std::size_t r : ranks) {
        NmfOptions o = opts;
        o.rank = r;
        out.push_back({r, nmf_factorize(p, o).report.residual_energy});
    }
    return out;
}

SubspaceResidual subspace_residual(const HyperspectralSinogram& p, const SubspaceSinogram& v, const SpectralBasis& d) {
    require(v.geometry() == p.geometry(), "subspace sinogram geometry does not match the hyperspectral sinogram");
    require(v.rank() == d.rank(), "coefficient rank " + std::to_string(v.rank()) + " does not match basis rank " +
                                      std::to_string(d.rank()));
    require(d.num_bins() == p.num_bins(), "basis has " + std::to_string(d.num_bins()) + " bins, sinogram has " +
                                              std::to_string(p.num_bins()));
    const std::size_t np = p.num_measurements();
    const std::size_t nk = p.num_bins();
    const std::size_t rank = d.rank();
    const auto pv = p.values();
    const auto cv = v.coeffs();
    const auto dv = d.values();

    SubspaceResidual out;
    out.residual.resize(np * nk);
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t k = 0; k < nk; ++k) {
            double model = 0.0;
            for (std::size_t s = 0; s < rank; ++s) {
                model += static_cast<double>(cv[i * rank + s]) * static_cast<double>(dv[k * rank + s]);
            }
            const double r = static_cast<double>(pv[i * nk + k]) - model;
            out.residual[i * nk + k] = static_cast<float>(r);
            err += r * r;
            ref += static_cast<double>(pv[i * nk + k]) * static_cast<double>(pv[i * nk + k]);
        }
    }
    out.residual_energy = ref > 0.0 ? err / ref : 0.0;
    return out;
}

SubspaceSinogram project_onto_basis(const HyperspectralSinogram& sinogram, const SpectralBasis& basis, bool nonneg) {
    require(basis.num_bins() == sinogram.num_bins(), "basis has " + std::to_string(basis.num_bins()) +
                                                         " bins, sinogram has " + std::to_string(sinogram.num_bins()));
    const std::size_t np = sinogram.num_measurements();
    const std::size_t nk = sinogram.num_bins();
    const auto rank = static_cast<Eigen::Index>(basis.rank());

    Matrix d(static_cast<Eigen::Index>(nk), rank);
    for (std::size_t k = 0; k < nk; ++k) {
        for (Eigen::Index s = 0; s < rank; ++s) {
            d(static_cast<Eigen::Index>(k), s) = basis.at(k, static_cast<std::size_t>(s));
        }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(d);
    require(qr.rank() == rank, "basis is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                                   std::to_string(rank) + " columns)");

    const RowMatrix p = to_matrix(sinogram.values(), np, nk);
    const Matrix gram = d.transpose() * d;
    const Eigen::LDLT<Matrix> solver(gram);
    RowMatrix c = (solver.solve((p * d).transpose())).transpose();

    if (nonneg) {
        // Projected multiplicative refinement from the clipped least-squares start.
        c = c.cwiseMax(0.0);
        const RowMatrix numer = p * d;
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            if (!(c.data()[i] > 0.0) && numer.data()[i] > 0.0) {
                c.data()[i] = 1e-12;
            }
        }
        for (int iter = 0; iter < 500; ++iter) {
            const RowMatrix denom = c * gram;
            double change = 0.0;
            double scale = 0.0;
            for (Eigen::Index i = 0; i < c.size(); ++i) {
                const double before = c.data()[i];
                multiplicative_step(c.data()[i], std::max(numer.data()[i], 0.0), denom.data()[i]);
                change += std::abs(c.data()[i] - before);
                scale += std::abs(c.data()[i]);
            }
            if (scale == 0.0 || change <= 1e-10 * scale) {
                break;
            }
        }
    }

    std::vector<float> out(np * static_cast<std::size_t>(rank));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(c.data()[i]);
    }
    return SubspaceSinogram(sinogram.geometry(), basis.rank(), std::move(out), nonneg);
}

}  // namespace hsnct

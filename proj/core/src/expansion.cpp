#include <string>

#include "hsnct/errors.hpp"
#include "hsnct/nmf.hpp"

namespace hsnct {

VolumeStack expand(const VolumeStack& subspace_volume, const SpectralBasis& d) {
    const std::size_t rank = d.rank();
    require(subspace_volume.channels() == rank,
            "subspace volume has " + std::to_string(subspace_volume.channels()) +
                " channels but the basis has N_s = " + std::to_string(rank));
    const std::size_t nk = d.num_bins();
    const std::size_t nx = subspace_volume.num_voxels();
    const auto xs = subspace_volume.voxels();
    const auto basis = d.values();

    std::vector<float> xh(nx * nk);
    const auto nx_signed = static_cast<std::ptrdiff_t>(nx);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < nx_signed; ++n) {
        const std::size_t vox = static_cast<std::size_t>(n);
        const float* coeff = xs.data() + vox * rank;
        float* out = xh.data() + vox * nk;
        for (std::size_t k = 0; k < nk; ++k) {
            const float* row = basis.data() + k * rank;
            double acc = 0.0;
            for (std::size_t s = 0; s < rank; ++s) {
                acc += static_cast<double>(coeff[s]) * static_cast<double>(row[s]);
            }
            out[k] = static_cast<float>(acc);
        }
    }
    return VolumeStack(subspace_volume.num_slices(), subspace_volume.image_size(), nk, std::move(xh),
                       subspace_volume.voxel_pitch());
}

}  // namespace hsnct

#include "hsnct/fbp.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "hsnct/errors.hpp"

namespace hsnct {
namespace {

// FFTW planning is not thread safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

struct RealBuffer {
    explicit RealBuffer(std::size_t n) : data(fftw_alloc_real(n)) {}
    ~RealBuffer() { fftw_free(data); }
    RealBuffer(const RealBuffer&) = delete;
    RealBuffer& operator=(const RealBuffer&) = delete;
    double* data;
};

struct ComplexBuffer {
    explicit ComplexBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {}
    ~ComplexBuffer() { fftw_free(data); }
    ComplexBuffer(const ComplexBuffer&) = delete;
    ComplexBuffer& operator=(const ComplexBuffer&) = delete;
    fftw_complex* data;
};

}  // namespace

struct FbpReconstructor::Plans {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
};

FbpReconstructor::FbpReconstructor(SliceGeometry geometry, FbpFilter filter)
    : projector_(std::move(geometry)), plans_(std::make_unique<Plans>()) {
    require(projector_.geometry().num_angles() >= 2, "FBP needs at least 2 projection angles");
    const std::size_t bins = projector_.geometry().num_detector_bins();
    padded_ = next_pow2(2 * bins);
    const std::size_t half = padded_ / 2 + 1;

    RealBuffer real(padded_);
    ComplexBuffer spectrum(half);
    {
        std::lock_guard lock(fftw_planner_mutex());
        plans_->forward = fftw_plan_dft_r2c_1d(static_cast<int>(padded_), real.data, spectrum.data, FFTW_ESTIMATE);
        plans_->inverse = fftw_plan_dft_c2r_1d(static_cast<int>(padded_), spectrum.data, real.data, FFTW_ESTIMATE);
    }
    if (plans_->forward == nullptr || plans_->inverse == nullptr) {
        throw std::runtime_error("FFTW plan creation failed");
    }

    // Band-limited ramp sampled in space: h(0) = 1/4, h(n odd) = -1/(pi n)^2,
    // h(n even) = 0, wrapped circularly over the padded length.
    const auto len = static_cast<long long>(padded_);
    for (long long i = 0; i < len; ++i) {
        const long long n = i <= len / 2 ? i : i - len;
        double value = 0.0;
        if (n == 0) {
            value = 0.25;
        } else if (n % 2 != 0) {
            value = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(n * n));
        }
        real.data[i] = value;
    }
    fftw_execute_dft_r2c(plans_->forward, real.data, spectrum.data);

    response_.resize(half);
    for (std::size_t f = 0; f < half; ++f) {
        double r = spectrum.data[f][0];
        if (filter == FbpFilter::SheppLogan && f > 0) {
            const double x = std::numbers::pi * static_cast<double>(f) / static_cast<double>(padded_);
            r *= std::sin(x) / x;
        }
        // Folds the 1/padded inverse-transform normalization into the response.
        response_[f] = r / static_cast<double>(padded_);
    }
}

FbpReconstructor::~FbpReconstructor() {
    std::lock_guard lock(fftw_planner_mutex());
    if (plans_->forward != nullptr) {
        fftw_destroy_plan(plans_->forward);
    }
    if (plans_->inverse != nullptr) {
        fftw_destroy_plan(plans_->inverse);
    }
}

std::vector<double> FbpReconstructor::filter(std::span<const double> sinogram) const {
    const auto& g = projector_.geometry();
    require(sinogram.size() == g.sinogram_size(), "sinogram size does not match the FBP geometry");
    const std::size_t bins = g.num_detector_bins();
    const std::size_t half = padded_ / 2 + 1;

    RealBuffer real(padded_);
    ComplexBuffer spectrum(half);
    std::vector<double> out(sinogram.size());
    for (std::size_t a = 0; a < g.num_angles(); ++a) {
        for (std::size_t i = 0; i < padded_; ++i) {
            real.data[i] = i < bins ? sinogram[a * bins + i] : 0.0;
        }
        fftw_execute_dft_r2c(plans_->forward, real.data, spectrum.data);
        for (std::size_t f = 0; f < half; ++f) {
            spectrum.data[f][0] *= response_[f];
            spectrum.data[f][1] *= response_[f];
        }
        fftw_execute_dft_c2r(plans_->inverse, spectrum.data, real.data);
        for (std::size_t i = 0; i < bins; ++i) {
            out[a * bins + i] = real.data[i];
        }
    }
    return out;
}

std::vector<double> FbpReconstructor::reconstruct(std::span<const double> sinogram) const {
    const auto& g = projector_.geometry();
    for (double v : sinogram) {
        require(std::isfinite(v), "FBP input sinogram must be finite");
    }
    const std::vector<double> filtered = filter(sinogram);
    std::vector<double> image(g.num_pixels());
    projector_.back(filtered, image);
    // The projector weights carry one factor of the pitch; the ramp kernel
    // sampled at spacing h carries 1/h^2.
    const double h = g.pixel_pitch();
    const double scale = std::numbers::pi / static_cast<double>(g.num_angles()) / (h * h);
    for (double& v : image) {
        v *= scale;
    }
    return image;
}

std::vector<double> fbp_reconstruct(std::span<const double> sinogram, const SliceGeometry& geometry, FbpFilter filter) {
    const FbpReconstructor fbp(geometry, filter);
    return fbp.reconstruct(sinogram);
}

}  // namespace hsnct

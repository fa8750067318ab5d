#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hsnct {

// CODATA 2018 exact / recommended values.
inline constexpr double kPlanckConstant = 6.62607015e-34;  // J s
inline constexpr double kNeutronMass = 1.67492749804e-27;  // kg

/// Maps neutron time of flight to wavelength, lambda = (h / m_n) * (dt / L).
class ToFConverter {
public:
    explicit ToFConverter(double flight_path, double planck_h = kPlanckConstant,
                          double neutron_mass = kNeutronMass);

    double planck_h() const noexcept { return planck_h_; }
    double neutron_mass() const noexcept { return neutron_mass_; }
    double flight_path() const noexcept { return flight_path_; }

    /// h / (m_n L), in meters per second of flight time.
    double factor() const noexcept { return planck_h_ / neutron_mass_ / flight_path_; }

private:
    double planck_h_;
    double neutron_mass_;
    double flight_path_;
};

/// Parallel-beam acquisition: N_v views of an N_r x N_c detector.
class ScanGeometry {
public:
    ScanGeometry(std::size_t num_rows, std::size_t num_cols, std::vector<double> view_angles,
                 double flight_path, double pixel_pitch = 1.0);

    /// N_v angles evenly spaced over [0, pi).
    static ScanGeometry uniform(std::size_t num_views, std::size_t num_rows, std::size_t num_cols,
                                double flight_path, double pixel_pitch = 1.0);

    std::size_t num_views() const noexcept { return view_angles_.size(); }
    std::size_t num_rows() const noexcept { return num_rows_; }
    std::size_t num_cols() const noexcept { return num_cols_; }
    std::span<const double> view_angles() const noexcept { return view_angles_; }
    double flight_path() const noexcept { return flight_path_; }
    double pixel_pitch() const noexcept { return pixel_pitch_; }

    /// N_p = N_v * N_r * N_c.
    std::size_t num_measurements() const noexcept { return num_views() * num_rows_ * num_cols_; }
    /// N_x = N_r * N_c * N_c.
    std::size_t num_voxels() const noexcept { return num_rows_ * num_cols_ * num_cols_; }

    bool operator==(const ScanGeometry&) const = default;

private:
    std::size_t num_rows_;
    std::size_t num_cols_;
    std::vector<double> view_angles_;
    double flight_path_;
    double pixel_pitch_;
};

/// Wavelength binning of the time-of-flight detector.
class SpectralAxis {
public:
    SpectralAxis(std::vector<double> tof_edges, const ToFConverter& converter);

    /// num_bins equal-width ToF bins covering [tof_min, tof_max].
    static SpectralAxis uniform(std::size_t num_bins, double tof_min, double tof_max,
                                const ToFConverter& converter);

    std::size_t num_bins() const noexcept { return wavelength_centers_.size(); }
    std::span<const double> tof_edges() const noexcept { return tof_edges_; }
    std::span<const double> wavelength_centers() const noexcept { return wavelength_centers_; }
    double flight_path() const noexcept { return flight_path_; }

    bool operator==(const SpectralAxis&) const = default;

private:
    std::vector<double> tof_edges_;
    std::vector<double> wavelength_centers_;
    double flight_path_;
};

}  // namespace hsnct

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsnct/arrays.hpp"
#include "hsnct/nmf.hpp"
#include "hsnct/phantom.hpp"
#include "hsnct/reconstruct.hpp"

namespace hsnct {

struct PipelineConfig {
    NmfOptions subspace{};
    ReconOptions recon{};
    int threads = 1;  // overrides subspace.threads and recon.threads
    bool stage_timing = true;
};

struct RunReport {
    std::string algorithm;  // "FHR" or "DHR"
    std::string engine;     // "fbp" or "mbir"
    std::size_t n_k = 0;
    std::size_t n_s = 0;  // equals n_k for DHR
    double extract_s = 0.0;
    double recon_s = 0.0;
    double expand_s = 0.0;
    double total_s = 0.0;
    std::size_t channels_reconstructed = 0;
    std::size_t mbir_iterations = 0;
    std::optional<double> epsilon_frac;
    std::optional<double> snr_db;
};

struct FhrResult {
    VolumeStack volume;
    SpectralBasis basis;
    FactorizationReport factorization;
    RunReport report;
};

struct DhrResult {
    VolumeStack volume;
    RunReport report;
};

/// Subspace extraction, N_s-channel reconstruction, subspace expansion.
FhrResult run_fhr(const HyperspectralSinogram& p, const PipelineConfig& cfg);

/// Per-bin reconstruction of all N_k channels.
DhrResult run_dhr(const HyperspectralSinogram& p, const PipelineConfig& cfg);

/// 10 log10(||ref||^2 / ||recon - ref||^2) over all voxels and channels.
/// Returns +infinity when the volumes are identical; throws on a zero reference.
double snr_db(const VolumeStack& recon, const VolumeStack& reference);

/// Reconstruction defaults shared by the CLI and the benchmark harness.
ReconOptions default_recon_options(ReconEngine engine);

std::string engine_name(ReconEngine engine);
ReconEngine parse_engine(const std::string& name);
std::string report_to_json(const RunReport& report);

struct BenchmarkConfig {
    BenchmarkPhantom phantom;
    PipelineConfig fhr;
    PipelineConfig dhr;
    bool clamp_negative = true;
    /// When set, PGM slices of truth, FHR and DHR are written here.
    std::optional<std::filesystem::path> image_dir;
};

struct BenchmarkRow {
    std::string algorithm;
    std::string engine;
    std::size_t n_k;
    std::size_t n_s;
    double snr_db;
    double extract_s;
    double recon_s;
    double expand_s;
    double total_s;
    double speedup;  // DHR total / this row's total
    std::size_t mbir_iterations;
};

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;  // FHR first, then DHR
    double epsilon_frac;
};

/// Builds the phantom, simulates one noisy scan and runs both pipelines on it.
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

inline constexpr const char* kBenchmarkCsvHeader =
    "algorithm,engine,n_k,n_s,snr_db,extract_s,recon_s,expand_s,total_s,speedup";

std::string benchmark_csv(const BenchmarkResult& result);

/// Default FHR/DHR configuration used by `hsnct bench` for a phantom preset.
BenchmarkConfig default_benchmark_config(BenchmarkPhantom phantom, ReconEngine engine, std::size_t rank,
                                         std::uint64_t seed, int threads);

/// 8-bit binary PGM of one slice and channel, linearly scaled from
/// min(0, slice min) to slice max. A constant slice is written black.
void write_pgm_slice(const std::filesystem::path& path, const VolumeStack& volume, std::size_t slice,
                     std::size_t channel);

}  // namespace hsnct

#include "hsnct/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <locale>
#include <sstream>

#include <json.hpp>

#include "hsnct/container.hpp"
#include "hsnct/errors.hpp"
#include "hsnct/preprocess.hpp"

namespace hsnct {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

ReconOptions with_threads(ReconOptions opts, int threads) {
    opts.threads = threads;
    return opts;
}

}  // namespace

ReconOptions default_recon_options(ReconEngine engine) {
    ReconOptions opts;
    opts.engine = engine;
    opts.filter = FbpFilter::Ramp;
    opts.mbir.prior = MbirPrior::Quadratic;
    opts.mbir.beta = 2.0;
    return opts;
}

std::string engine_name(ReconEngine engine) { return engine == ReconEngine::Fbp ? "fbp" : "mbir"; }

ReconEngine parse_engine(const std::string& name) {
    if (name == "fbp") {
        return ReconEngine::Fbp;
    }
    if (name == "mbir") {
        return ReconEngine::Mbir;
    }
    throw ValidationError("unknown reconstruction engine '" + name + "' (expected fbp or mbir)");
}

FhrResult run_fhr(const HyperspectralSinogram& p, const PipelineConfig& cfg) {
    require(cfg.threads >= 1, "thread count must be >= 1");
    const auto start = Clock::now();

    NmfOptions nmf = cfg.subspace;
    nmf.threads = cfg.threads;
    Factorization factors = nmf_factorize(p, nmf);
    const double extract_s = seconds_since(start);

    // A coefficient sinogram has no transmission of its own; weight every
    // channel by the mean spectral attenuation of the measurement instead.
    ReconOptions recon = with_threads(cfg.recon, cfg.threads);
    if (recon.weighting == StackWeighting::PerChannelTransmission) {
        recon.weighting = StackWeighting::SharedTransmission;
    }
    const auto recon_start = Clock::now();
    ReconStats stats;
    const VolumeStack subspace_volume = reconstruct_stack(factors.coefficients, recon, &stats);
    const double recon_s = seconds_since(recon_start);

    const auto expand_start = Clock::now();
    VolumeStack volume = expand(subspace_volume, factors.basis);
    const double expand_s = seconds_since(expand_start);

    RunReport report;
    report.algorithm = "FHR";
    report.engine = engine_name(cfg.recon.engine);
    report.n_k = p.num_bins();
    report.n_s = factors.basis.rank();
    report.channels_reconstructed = factors.basis.rank();
    report.mbir_iterations = stats.mbir_iterations;
    report.epsilon_frac = factors.report.residual_energy;
    if (cfg.stage_timing) {
        report.extract_s = extract_s;
        report.recon_s = recon_s;
        report.expand_s = expand_s;
        report.total_s = seconds_since(start);
    }
    return FhrResult{std::move(volume), std::move(factors.basis), std::move(factors.report), std::move(report)};
}

DhrResult run_dhr(const HyperspectralSinogram& p, const PipelineConfig& cfg) {
    require(cfg.threads >= 1, "thread count must be >= 1");
    const auto start = Clock::now();
    ReconStats stats;
    VolumeStack volume = reconstruct_stack(p, with_threads(cfg.recon, cfg.threads), &stats);
    const double recon_s = seconds_since(start);

    RunReport report;
    report.algorithm = "DHR";
    report.engine = engine_name(cfg.recon.engine);
    report.n_k = p.num_bins();
    report.n_s = p.num_bins();
    report.channels_reconstructed = p.num_bins();
    report.mbir_iterations = stats.mbir_iterations;
    if (cfg.stage_timing) {
        report.recon_s = recon_s;
        report.total_s = seconds_since(start);
    }
    return DhrResult{std::move(volume), std::move(report)};
}

double snr_db(const VolumeStack& recon, const VolumeStack& reference) {
    require(recon.num_slices() == reference.num_slices() && recon.image_size() == reference.image_size() &&
                recon.channels() == reference.channels(),
            "SNR needs identically shaped volumes");
    const auto r = recon.voxels();
    const auto ref = reference.voxels();
    double signal = 0.0;
    double error = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double s = ref[i];
        const double e = static_cast<double>(r[i]) - s;
        signal += s * s;
        error += e * e;
    }
    require(signal > 0.0, "SNR reference volume is all zero");
    if (error == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(signal / error);
}

std::string report_to_json(const RunReport& report) {
    nlohmann::json j;
    j["algorithm"] = report.algorithm;
    j["engine"] = report.engine;
    j["n_k"] = report.n_k;
    j["n_s"] = report.n_s;
    j["channels_reconstructed"] = report.channels_reconstructed;
    j["mbir_iterations"] = report.mbir_iterations;
    j["timings"] = {{"extract_s", report.extract_s},
                    {"recon_s", report.recon_s},
                    {"expand_s", report.expand_s},
                    {"total_s", report.total_s}};
    j["epsilon_frac"] = report.epsilon_frac ? nlohmann::json(*report.epsilon_frac) : nlohmann::json(nullptr);
    if (report.snr_db && std::isfinite(*report.snr_db)) {
        j["snr_db"] = *report.snr_db;
    } else if (report.snr_db) {
        j["snr_db"] = "perfect";
    } else {
        j["snr_db"] = nullptr;
    }
    return j.dump(2) + "\n";
}

BenchmarkConfig default_benchmark_config(BenchmarkPhantom phantom, ReconEngine engine, std::size_t rank,
                                         std::uint64_t seed, int threads) {
    PipelineConfig cfg;
    cfg.threads = threads;
    cfg.subspace.rank = rank;
    cfg.subspace.seed = seed;
    cfg.recon = default_recon_options(engine);

    BenchmarkConfig out{std::move(phantom), cfg, cfg, true, std::nullopt};
    out.phantom.spec.seed = seed;
    return out;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
    const auto& ph = config.phantom;
    const VolumeStack truth = build_ground_truth(ph.spec, ph.axis, ph.geometry.pixel_pitch());
    const RawScan scan =
        simulate_scan(truth, ph.geometry, ph.axis, ph.spec.flux, ph.spec.seed, SimulationOptions{}, config.fhr.threads);
    NormalizationOptions norm;
    norm.clamp_negative = config.clamp_negative;
    const HyperspectralSinogram p = normalize(scan, norm);

    FhrResult fhr = run_fhr(p, config.fhr);
    DhrResult dhr = run_dhr(p, config.dhr);
    fhr.report.snr_db = snr_db(fhr.volume, truth);
    dhr.report.snr_db = snr_db(dhr.volume, truth);

    if (config.image_dir) {
        std::filesystem::create_directories(*config.image_dir);
        const std::size_t z = truth.num_slices() / 2;
        const std::size_t nk = truth.channels();
        for (std::size_t k : {nk / 4, nk / 2, (3 * nk) / 4}) {
            const std::string suffix = "_z" + std::to_string(z) + "_k" + std::to_string(k) + ".pgm";
            write_pgm_slice(*config.image_dir / ("truth" + suffix), truth, z, k);
            write_pgm_slice(*config.image_dir / ("fhr" + suffix), fhr.volume, z, k);
            write_pgm_slice(*config.image_dir / ("dhr" + suffix), dhr.volume, z, k);
        }
    }

    const double dhr_total = dhr.report.total_s;
    auto make_row = [&](const RunReport& r) {
        return BenchmarkRow{r.algorithm,
                            r.engine,
                            r.n_k,
                            r.n_s,
                            *r.snr_db,
                            r.extract_s,
                            r.recon_s,
                            r.expand_s,
                            r.total_s,
                            r.total_s > 0.0 ? dhr_total / r.total_s : 0.0,
                            r.mbir_iterations};
    };
    return BenchmarkResult{{make_row(fhr.report), make_row(dhr.report)}, fhr.factorization.residual_energy};
}

std::string benchmark_csv(const BenchmarkResult& result) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out << kBenchmarkCsvHeader << '\n';
    for (const auto& r : result.rows) {
        out << r.algorithm << ',' << r.engine << ',' << r.n_k << ',' << r.n_s << ',';
        out << std::fixed;
        out.precision(4);
        out << r.snr_db << ',';
        out.precision(6);
        out << r.extract_s << ',' << r.recon_s << ',' << r.expand_s << ',' << r.total_s << ',';
        out.precision(4);
        out << r.speedup << '\n';
        out << std::defaultfloat;
    }
    return out.str();
}

void write_pgm_slice(const std::filesystem::path& path, const VolumeStack& volume, std::size_t slice,
                     std::size_t channel) {
    require(slice < volume.num_slices(), "slice index " + std::to_string(slice) + " out of range (volume has " +
                                             std::to_string(volume.num_slices()) + " slices)");
    require(channel < volume.channels(), "bin index " + std::to_string(channel) + " out of range (volume has " +
                                             std::to_string(volume.channels()) + " channels)");
    const std::size_t n = volume.image_size();
    double lo = 0.0;
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            const double v = volume.at(slice, y, x, channel);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    std::string pixels(n * n, '\0');
    if (hi > lo) {
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                const double t = (volume.at(slice, y, x, channel) - lo) / (hi - lo);
                pixels[y * n + x] = static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0)));
            }
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << "P5\n" << n << ' ' << n << "\n255\n";
    out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    if (!out) {
        throw IoError("write to '" + path.string() + "' failed");
    }
}

}  // namespace hsnct

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "hsnct/container.hpp"
#include "hsnct/errors.hpp"
#include "hsnct/nmf.hpp"
#include "hsnct/phantom.hpp"
#include "hsnct/pipeline.hpp"
#include "hsnct/preprocess.hpp"
#include "hsnct/reconstruct.hpp"

namespace hsnct::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalFlags {
    int threads = 1;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

class Logger {
public:
    Logger(std::ostream& err, const bool& enabled) : err_(err), enabled_(enabled) {}

    template <typename... Args>
    void operator()(const Args&... args) const {
        if (!enabled_) {
            return;
        }
        std::ostringstream line;
        line << "hsnct: ";
        (line << ... << args);
        err_ << line.str() << '\n';
    }

private:
    std::ostream& err_;
    const bool& enabled_;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw IoError("read from '" + path.string() + "' failed");
    }
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw IoError("write to '" + path.string() + "' failed");
    }
}

std::uint64_t require_seed(const GlobalFlags& g, const char* command) {
    if (!g.seed) {
        throw ValidationError(std::string(command) + " needs --seed for reproducibility");
    }
    return *g.seed;
}

BenchmarkPhantom preset_phantom(const std::string& name) {
    if (name == "desk") {
        return default_benchmark_phantom();
    }
    if (name == "tiny") {
        return tiny_benchmark_phantom();
    }
    throw ValidationError("unknown preset '" + name + "' (expected desk or tiny)");
}

// Reconstruction flags shared by reconstruct, fhr and dhr.
struct ReconFlags {
    std::string engine;
    std::optional<double> beta;
    std::optional<std::string> prior;
    std::optional<double> huber_delta;
    std::optional<std::size_t> mbir_iters;
    std::optional<double> mbir_tol;
    std::optional<std::string> filter;

    void attach(CLI::App& sub) {
        sub.add_option("--engine", engine, "Reconstruction engine")
            ->required()
            ->check(CLI::IsMember({"fbp", "mbir"}));
        sub.add_option("--beta", beta, "MBIR prior strength");
        sub.add_option("--prior", prior, "MBIR prior")->check(CLI::IsMember({"quadratic", "huber"}));
        sub.add_option("--huber-delta", huber_delta, "Huber threshold");
        sub.add_option("--mbir-iters", mbir_iters, "Maximum MBIR sweeps");
        sub.add_option("--mbir-tol", mbir_tol, "MBIR relative objective tolerance");
        sub.add_option("--filter", filter, "FBP filter")->check(CLI::IsMember({"ramp", "shepp-logan"}));
    }

    ReconOptions options(int threads) const {
        ReconOptions opts = default_recon_options(parse_engine(engine));
        opts.threads = threads;
        if (beta) {
            opts.mbir.beta = *beta;
        }
        if (prior) {
            opts.mbir.prior = *prior == "huber" ? MbirPrior::Huber : MbirPrior::Quadratic;
        }
        if (huber_delta) {
            opts.mbir.huber_delta = *huber_delta;
        }
        if (mbir_iters) {
            opts.mbir.max_iters = *mbir_iters;
        }
        if (mbir_tol) {
            opts.mbir.rel_tol = *mbir_tol;
        }
        if (filter) {
            opts.filter = *filter == "shepp-logan" ? FbpFilter::SheppLogan : FbpFilter::Ramp;
        }
        opts.mbir.validate();
        return opts;
    }
};

struct NmfFlags {
    std::size_t rank = 0;
    std::optional<std::size_t> max_iters;
    std::optional<double> tol;
    std::string init = "uniform";

    void attach(CLI::App& sub) {
        sub.add_option("--rank", rank, "Subspace dimension N_s")->required();
        sub.add_option("--max-iters", max_iters, "Maximum NMF iterations");
        sub.add_option("--tol", tol, "NMF relative objective tolerance");
        sub.add_option("--init", init, "NMF initialization")->check(CLI::IsMember({"uniform", "nndsvd"}));
    }

    NmfOptions options(std::uint64_t seed, int threads) const {
        NmfOptions opts;
        opts.rank = rank;
        opts.seed = seed;
        opts.threads = threads;
        opts.init = init == "nndsvd" ? NmfInit::Nndsvd : NmfInit::SeededUniform;
        if (max_iters) {
            opts.max_iters = *max_iters;
        }
        if (tol) {
            opts.rel_tol = *tol;
        }
        return opts;
    }
};

struct Commands {
    GlobalFlags global;
    std::map<const CLI::App*, std::function<void()>> handlers;
};

void add_phantom(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("phantom", "Build a ground-truth volume from a phantom spec");
    struct Flags {
        std::string spec;
        std::string preset;
        std::string out_truth;
        std::string out_spec;
        std::string out_geom;
    };
    auto f = std::make_shared<Flags>();
    auto* spec_opt = sub->add_option("--spec", f->spec, "Phantom spec JSON (with a \"spectral\" object)");
    auto* preset_opt = sub->add_option("--preset", f->preset, "Built-in phantom: desk or tiny");
    spec_opt->excludes(preset_opt);
    sub->add_option("--out-truth", f->out_truth, "Output ground-truth volume")->required();
    sub->add_option("--out-spec", f->out_spec, "Also write the phantom spec JSON");
    sub->add_option("--out-geom", f->out_geom, "Also write the scan geometry JSON (preset only)");
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        PhantomSpec spec;
        std::optional<SpectralAxis> axis;
        std::optional<ScanGeometry> geometry;
        double pitch = 1.0;
        if (!f->preset.empty()) {
            BenchmarkPhantom ph = preset_phantom(f->preset);
            spec = ph.spec;
            axis = ph.axis;
            geometry = ph.geometry;
            pitch = ph.geometry.pixel_pitch();
        } else if (!f->spec.empty()) {
            const std::string text = read_text(f->spec);
            spec = phantom_spec_from_json(text);
            const json j = json::parse(text);
            if (!j.contains("spectral")) {
                throw ValidationError("phantom spec '" + f->spec + "' has no \"spectral\" object");
            }
            axis = spectral_axis_from_json(j["spectral"].dump());
            pitch = j.value("pixel_pitch", 1.0);
        } else {
            throw ValidationError("phantom needs --spec or --preset");
        }
        if (cmds.global.seed) {
            spec.seed = *cmds.global.seed;
        }
        const VolumeStack truth = build_ground_truth(spec, *axis, pitch);
        save(f->out_truth, truth, *axis);
        log("wrote ", f->out_truth, " (", truth.num_slices(), " slices of ", truth.image_size(), "x",
            truth.image_size(), ", ", truth.channels(), " bins)");
        if (!f->out_spec.empty()) {
            json j = json::parse(to_json(spec));
            j["spectral"] = json::parse(to_json(*axis));
            j["pixel_pitch"] = pitch;
            write_text(f->out_spec, j.dump(2) + "\n");
        }
        if (!f->out_geom.empty()) {
            if (!geometry) {
                throw ValidationError("--out-geom is only available with --preset");
            }
            write_text(f->out_geom, json::parse(to_json(*geometry)).dump(2) + "\n");
        }
    };
}

void add_simulate(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("simulate", "Simulate a noisy time-of-flight scan of a ground truth");
    struct Flags {
        std::string truth;
        std::string geom;
        double flux = 0.0;
        std::string out;
        bool noiseless = false;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--truth", f->truth, "Ground-truth volume")->required();
    sub->add_option("--geom", f->geom, "Scan geometry JSON")->required();
    sub->add_option("--flux", f->flux, "Open-beam counts per bin I_0")->required();
    sub->add_option("--out", f->out, "Output raw scan")->required();
    sub->add_flag("--noiseless", f->noiseless, "Store expected counts instead of Poisson samples");
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        const std::uint64_t seed = f->noiseless && !cmds.global.seed ? 0 : require_seed(cmds.global, "simulate");
        const ContainerHeader header = read_container_header(f->truth);
        const std::optional<SpectralAxis> axis = volume_spectral_axis(header);
        if (!axis) {
            throw ValidationError("truth volume '" + f->truth + "' carries no spectral axis");
        }
        const VolumeStack truth = load_volume(f->truth);
        const ScanGeometry geometry = scan_geometry_from_json(read_text(f->geom));
        SimulationOptions opts;
        opts.poisson_noise = !f->noiseless;
        const RawScan scan = simulate_scan(truth, geometry, *axis, f->flux, seed, opts, cmds.global.threads);
        save(f->out, scan);
        log("wrote ", f->out, " (", geometry.num_views(), " views, ", axis->num_bins(), " bins)");
    };
}

void add_normalize(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("normalize", "Convert counts to attenuation line integrals");
    struct Flags {
        std::string scan;
        std::string out;
        bool no_clamp = false;
        std::optional<double> floor;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--scan", f->scan, "Raw scan")->required();
    sub->add_option("--out", f->out, "Output hyperspectral sinogram")->required();
    sub->add_flag("--no-clamp", f->no_clamp, "Keep negative line integrals");
    sub->add_option("--floor", f->floor, "Count floor for zero-count pixels");
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        NormalizationOptions opts;
        opts.clamp_negative = !f->no_clamp;
        if (f->floor) {
            opts.count_floor = *f->floor;
        }
        const HyperspectralSinogram p = normalize(load_raw_scan(f->scan), opts);
        save(f->out, p);
        log("wrote ", f->out);
    };
}

void add_extract(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("extract", "Factor a sinogram into subspace coefficients and a spectral basis");
    struct Flags {
        std::string in;
        std::string out_v;
        std::string out_d;
        NmfFlags nmf;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--in", f->in, "Hyperspectral sinogram")->required();
    sub->add_option("--out-v", f->out_v, "Output subspace sinogram")->required();
    sub->add_option("--out-d", f->out_d, "Output spectral basis")->required();
    f->nmf.attach(*sub);
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        const NmfOptions opts = f->nmf.options(require_seed(cmds.global, "extract"), cmds.global.threads);
        const Factorization fac = nmf_factorize(load_sinogram(f->in), opts);
        save(f->out_v, fac.coefficients);
        save(f->out_d, fac.basis);
        log("rank ", fac.basis.rank(), ": ", fac.report.iterations_run, " iterations, epsilon_frac ",
            fac.report.residual_energy, fac.report.converged ? "" : " (not converged)");
        if (fac.report.degenerate_column) {
            log("warning: a basis column collapsed; consider a smaller --rank");
        }
    };
}

void add_reconstruct(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("reconstruct", "Reconstruct every channel of a sinogram");
    struct Flags {
        std::string in;
        std::string out;
        ReconFlags recon;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--in", f->in, "Subspace or hyperspectral sinogram")->required();
    sub->add_option("--out", f->out, "Output volume")->required();
    f->recon.attach(*sub);
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        ReconOptions opts = f->recon.options(cmds.global.threads);
        const ContainerHeader header = read_container_header(f->in);
        ReconStats stats;
        if (header.role == role::kSubspaceSinogram) {
            opts.weighting = StackWeighting::SharedTransmission;
            save(f->out, reconstruct_stack(load_subspace_sinogram(f->in), opts, &stats));
        } else if (header.role == role::kSinogram) {
            const HyperspectralSinogram p = load_sinogram(f->in);
            save(f->out, reconstruct_stack(p, opts, &stats), p.axis());
        } else {
            throw ValidationError("'" + f->in + "' is a " + header.role + " container, not a sinogram");
        }
        log("reconstructed ", stats.reconstructions, " slices", opts.engine == ReconEngine::Mbir ? " in " : "",
            opts.engine == ReconEngine::Mbir ? std::to_string(stats.mbir_iterations) + " MBIR sweeps" : "");
    };
}

void add_expand(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("expand", "Map a subspace volume back to wavelength bins");
    struct Flags {
        std::string in;
        std::string basis;
        std::string out;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--in", f->in, "Subspace volume")->required();
    sub->add_option("--basis", f->basis, "Spectral basis")->required();
    sub->add_option("--out", f->out, "Output hyperspectral volume")->required();
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        const SpectralBasis d = load_basis(f->basis);
        save(f->out, expand(load_volume(f->in), d), d.axis());
        log("wrote ", f->out, " (", d.num_bins(), " bins)");
    };
}

std::optional<double> snr_against(const std::string& truth_path, const VolumeStack& volume) {
    if (truth_path.empty()) {
        return std::nullopt;
    }
    return snr_db(volume, load_volume(truth_path));
}

void add_fhr(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("fhr", "Subspace extraction, reconstruction and expansion in one run");
    struct Flags {
        std::string in;
        std::string out;
        std::string report;
        std::string truth;
        NmfFlags nmf;
        ReconFlags recon;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--in", f->in, "Hyperspectral sinogram")->required();
    sub->add_option("--out", f->out, "Output hyperspectral volume")->required();
    sub->add_option("--report", f->report, "Output run report JSON")->required();
    sub->add_option("--truth", f->truth, "Ground truth for an SNR entry in the report");
    f->nmf.attach(*sub);
    f->recon.attach(*sub);
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        PipelineConfig cfg;
        cfg.threads = cmds.global.threads;
        cfg.subspace = f->nmf.options(require_seed(cmds.global, "fhr"), cfg.threads);
        cfg.recon = f->recon.options(cfg.threads);
        const HyperspectralSinogram p = load_sinogram(f->in);
        FhrResult result = run_fhr(p, cfg);
        result.report.snr_db = snr_against(f->truth, result.volume);
        save(f->out, result.volume, p.axis());
        write_text(f->report, report_to_json(result.report));
        log("FHR ", result.report.engine, ": N_s ", result.report.n_s, ", epsilon_frac ",
            *result.report.epsilon_frac, ", ", result.report.total_s, " s");
    };
}

void add_dhr(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("dhr", "Reconstruct every wavelength bin independently");
    struct Flags {
        std::string in;
        std::string out;
        std::string report;
        std::string truth;
        ReconFlags recon;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--in", f->in, "Hyperspectral sinogram")->required();
    sub->add_option("--out", f->out, "Output hyperspectral volume")->required();
    sub->add_option("--report", f->report, "Output run report JSON")->required();
    sub->add_option("--truth", f->truth, "Ground truth for an SNR entry in the report");
    f->recon.attach(*sub);
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        PipelineConfig cfg;
        cfg.threads = cmds.global.threads;
        cfg.recon = f->recon.options(cfg.threads);
        const HyperspectralSinogram p = load_sinogram(f->in);
        DhrResult result = run_dhr(p, cfg);
        result.report.snr_db = snr_against(f->truth, result.volume);
        save(f->out, result.volume, p.axis());
        write_text(f->report, report_to_json(result.report));
        log("DHR ", result.report.engine, ": ", result.report.n_k, " bins, ", result.report.total_s, " s");
    };
}

void add_bench(CLI::App& app, Commands& cmds, std::ostream& out, std::ostream& err) {
    auto* sub = app.add_subcommand("bench", "Run FHR and DHR on a simulated phantom and write a results CSV");
    struct Flags {
        std::string out;
        std::string preset = "desk";
        std::string engine = "mbir";
        std::size_t rank = 4;
        std::string images;
        bool no_clamp = false;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--out", f->out, "Output CSV")->required();
    sub->add_option("--preset", f->preset, "Phantom preset")->check(CLI::IsMember({"desk", "tiny"}));
    sub->add_option("--engine", f->engine, "Engine for both pipelines")->check(CLI::IsMember({"fbp", "mbir"}));
    sub->add_option("--rank", f->rank, "Subspace dimension N_s");
    sub->add_option("--images", f->images, "Directory for PGM slices of truth, FHR and DHR");
    sub->add_flag("--no-clamp", f->no_clamp, "Keep negative line integrals");
    cmds.handlers[sub] = [f, &cmds, &out, &err] {
        const Logger log(err, cmds.global.verbose);
        BenchmarkPhantom phantom = preset_phantom(f->preset);
        const std::uint64_t seed = cmds.global.seed.value_or(phantom.spec.seed);
        BenchmarkConfig cfg =
            default_benchmark_config(std::move(phantom), parse_engine(f->engine), f->rank, seed, cmds.global.threads);
        cfg.clamp_negative = !f->no_clamp;
        if (!f->images.empty()) {
            cfg.image_dir = f->images;
        }
        log("bench: preset ", f->preset, ", engine ", f->engine, ", N_s ", f->rank, ", seed ", seed);
        const BenchmarkResult result = run_benchmark(cfg);
        const std::string csv = benchmark_csv(result);
        write_text(f->out, csv);
        out << csv;
        log("epsilon_frac ", result.epsilon_frac);
    };
}

void add_slice(CLI::App& app, Commands& cmds, std::ostream& err) {
    auto* sub = app.add_subcommand("slice", "Export one slice of one channel as an 8-bit PGM");
    struct Flags {
        std::string in;
        std::size_t z = 0;
        std::size_t bin = 0;
        std::string out;
    };
    auto f = std::make_shared<Flags>();
    sub->add_option("--in", f->in, "Volume")->required();
    sub->add_option("--z", f->z, "Slice index")->required();
    sub->add_option("--bin", f->bin, "Channel index")->required();
    sub->add_option("--out", f->out, "Output PGM")->required();
    cmds.handlers[sub] = [f, &cmds, &err] {
        const Logger log(err, cmds.global.verbose);
        write_pgm_slice(f->out, load_volume(f->in), f->z, f->bin);
        log("wrote ", f->out);
    };
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fast hyperspectral neutron CT reconstruction", "hsnct"};
    app.require_subcommand(1);
    app.fallthrough();

    Commands cmds;
    app.add_option("--threads", cmds.global.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", cmds.global.seed, "Random seed");
    app.add_flag("--verbose", cmds.global.verbose, "Log progress to stderr");

    add_phantom(app, cmds, err);
    add_simulate(app, cmds, err);
    add_normalize(app, cmds, err);
    add_extract(app, cmds, err);
    add_reconstruct(app, cmds, err);
    add_expand(app, cmds, err);
    add_fhr(app, cmds, err);
    add_dhr(app, cmds, err);
    add_bench(app, cmds, out, err);
    add_slice(app, cmds, err);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        const CLI::App* failing = &app;
        for (const CLI::App* sub : app.get_subcommands()) {
            failing = sub;
        }
        err << "error: " << e.what() << "\n\n" << failing->help();
        return 1;
    }

    const CLI::App* selected = app.get_subcommands().front();
    try {
        cmds.handlers.at(selected)();
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const hsnct::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace hsnct::cli

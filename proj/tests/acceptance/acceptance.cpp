// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "hsnct/container.hpp"
#include "hsnct/fbp.hpp"
#include "hsnct/nmf.hpp"
#include "hsnct/phantom.hpp"
#include "hsnct/pipeline.hpp"
#include "hsnct/preprocess.hpp"
#include "hsnct/projector.hpp"
#include "test_support.hpp"

using namespace hsnct;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c, d);
    return buf;
}

std::vector<double> uniform_angles(std::size_t n) {
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    }
    return a;
}

std::vector<double> disk(std::size_t n, double radius, double value, double pitch = 1.0) {
    std::vector<double> img(n * n, 0.0);
    const double half = static_cast<double>(n / 2);
    for (std::size_t iy = 0; iy < n; ++iy) {
        for (std::size_t ix = 0; ix < n; ++ix) {
            const double x = (static_cast<double>(ix) - half) * pitch;
            const double y = (static_cast<double>(iy) - half) * pitch;
            img[iy * n + ix] = x * x + y * y <= radius * radius ? value : 0.0;
        }
    }
    return img;
}

// Line integrals of every bin in RawScan layout [view][row][col][bin].
std::vector<double> line_integrals(const VolumeStack& truth, const ScanGeometry& g) {
    const std::size_t nk = truth.channels();
    const std::size_t n = g.num_cols();
    const SliceGeometry sg = SliceGeometry::from_scan(g);
    std::vector<double> out(g.num_measurements() * nk);
    for (std::size_t r = 0; r < g.num_rows(); ++r) {
        for (std::size_t k = 0; k < nk; ++k) {
            std::vector<double> img(n * n);
            for (std::size_t iy = 0; iy < n; ++iy) {
                for (std::size_t ix = 0; ix < n; ++ix) {
                    img[iy * n + ix] = truth.at(r, iy, ix, k);
                }
            }
            const auto s = forward_project(img, sg);
            for (std::size_t v = 0; v < g.num_views(); ++v) {
                for (std::size_t b = 0; b < n; ++b) {
                    out[(((v * g.num_rows() + r) * n) + b) * nk + k] = s[v * n + b];
                }
            }
        }
    }
    return out;
}

HyperspectralSinogram exact_rank(std::size_t r, std::uint64_t seed) {
    const auto g = test::test_geometry(5, 1, 8);
    const std::size_t np = g.num_measurements();
    const std::size_t nk = 24;
    const auto v = test::random_doubles(np * r, seed, 0.1, 1.0);
    const auto d = test::random_doubles(nk * r, seed + 1000, 0.1, 1.0);
    std::vector<float> p(np * nk);
    for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t k = 0; k < nk; ++k) {
            double acc = 0.0;
            for (std::size_t s = 0; s < r; ++s) {
                acc += v[i * r + s] * d[k * r + s];
            }
            p[i * nk + k] = static_cast<float>(acc);
        }
    }
    return HyperspectralSinogram(g, test::test_axis(nk), std::move(p));
}

std::optional<BenchmarkResult> desk_bench;

const BenchmarkResult& desk_benchmark() {
    if (!desk_bench) {
        std::cerr << "running the desk benchmark (MBIR, N_s = 4); this takes several minutes\n";
        const auto cfg = default_benchmark_config(default_benchmark_phantom(), ReconEngine::Mbir, 4, 20240917, 1);
        desk_bench = run_benchmark(cfg);
        std::cerr << benchmark_csv(*desk_bench);
    }
    return *desk_bench;
}

Verdict speedup() {
    const auto& b = desk_benchmark();
    const double fhr = b.rows[0].total_s;
    const double dhr = b.rows[1].total_s;
    return {fhr * 8.0 <= dhr, fmt("FHR %.1f s, DHR %.1f s, speedup %.2fx (need >= 8)", fhr, dhr, dhr / fhr)};
}

Verdict snr_gain() {
    const auto& b = desk_benchmark();
    const double gain = b.rows[0].snr_db - b.rows[1].snr_db;
    return {gain >= 5.0,
            fmt("FHR %.2f dB, DHR %.2f dB, gain %+.2f dB (need >= +5)", b.rows[0].snr_db, b.rows[1].snr_db, gain)};
}

Verdict nmf_suite() {
    // (a) monotone objective on 100 random instances.
    std::size_t violations = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 gen(seed);
        const std::size_t views = 1 + gen() % 4;
        const std::size_t cols = 2 + gen() % 6;
        const std::size_t nk = 3 + gen() % 12;
        const auto g = test::test_geometry(views, 1, cols);
        const HyperspectralSinogram p(g, test::test_axis(nk),
                                      test::random_floats(g.num_measurements() * nk, seed, 0.0f, 3.0f));
        NmfOptions o;
        o.rank = 1 + gen() % std::min<std::size_t>(3, std::min(g.num_measurements(), nk));
        o.seed = seed;
        o.max_iters = 200;
        o.rel_tol = 1e-12;
        const auto f = nmf_factorize(p, o);
        const auto& t = f.report.objective_trace;
        for (std::size_t i = 1; i < t.size(); ++i) {
            const auto& re = f.report.reseed_iterations;
            if (std::find(re.begin(), re.end(), i) == re.end() && t[i] > t[i - 1] * (1.0 + 1e-10)) {
                ++violations;
            }
        }
    }

    // (b) exact non-negative rank r recovered with N_s = r.
    double worst_eps = 0.0;
    for (std::size_t r = 1; r <= 3; ++r) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            NmfOptions o;
            o.rank = r;
            o.seed = seed;
            o.max_iters = 20000;
            o.rel_tol = 1e-12;
            worst_eps = std::max(worst_eps, nmf_factorize(exact_rank(r, 10 * seed + r), o).report.residual_energy);
        }
    }

    // (c) residual invariant under V diag(s), D diag(1/s).
    const auto p = exact_rank(3, 14);
    NmfOptions o;
    o.rank = 3;
    o.max_iters = 30;
    const auto f = nmf_factorize(p, o);
    const double base = subspace_residual(p, f.coefficients, f.basis).residual_energy;
    double worst_gauge = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 gen(seed);
        std::uniform_int_distribution<int> expo(-12, 12);
        std::vector<float> scale(3);
        for (auto& s : scale) {
            s = std::ldexp(1.0f, expo(gen));
        }
        std::vector<float> v(f.coefficients.coeffs().begin(), f.coefficients.coeffs().end());
        std::vector<float> d(f.basis.values().begin(), f.basis.values().end());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] *= scale[i % 3];
        }
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] /= scale[i % 3];
        }
        const double e =
            subspace_residual(p, SubspaceSinogram(p.geometry(), 3, v), SpectralBasis(p.axis(), 3, d)).residual_energy;
        worst_gauge = std::max(worst_gauge, std::fabs(e - base) / base);
    }
    return {violations == 0 && worst_eps <= 1e-6 && worst_gauge <= 1e-10,
            fmt("monotone violations %.0f/100 instances, worst rank-r eps_frac %.2e, gauge change %.2e", violations,
                worst_eps, worst_gauge)};
}

Verdict projector_suite() {
    const SliceGeometry g(64, uniform_angles(32));
    const ParallelBeamProjector proj(g);
    double worst_adjoint = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto x = test::random_doubles(g.num_pixels(), 2 * seed, -1.0, 1.0);
        const auto y = test::random_doubles(g.sinogram_size(), 2 * seed + 1, -1.0, 1.0);
        std::vector<double> ax(g.sinogram_size());
        std::vector<double> aty(g.num_pixels());
        proj.forward(x, ax);
        proj.back(y, aty);
        const double lhs = std::inner_product(ax.begin(), ax.end(), y.begin(), 0.0);
        const double rhs = std::inner_product(x.begin(), x.end(), aty.begin(), 0.0);
        worst_adjoint = std::max(worst_adjoint, std::fabs(lhs - rhs) / std::max(std::fabs(lhs), std::fabs(rhs)));
    }

    // Chord 2 sqrt(R^2 - s^2) within 2 pixel lengths * mu, rim bins excluded.
    double worst_chord = 0.0;
    const double mu = 0.8;
    for (double pitch : {1.0, 0.5}) {
        const double radius = 16.0 * pitch;
        const SliceGeometry cg(64, uniform_angles(32), pitch);
        const auto s = forward_project(disk(64, radius, mu, pitch), cg);
        for (std::size_t a = 0; a < 32; ++a) {
            for (std::size_t b = 0; b < 64; ++b) {
                const double u = (static_cast<double>(b) - 32.0) * pitch;
                if (std::fabs(u) <= radius - 2.0 * pitch) {
                    const double chord = 2.0 * std::sqrt(radius * radius - u * u);
                    worst_chord = std::max(worst_chord, std::fabs(s[a * 64 + b] - mu * chord) / (pitch * mu));
                }
            }
        }
    }

    const std::size_t n = 64;
    const double radius = 16.0;
    const SliceGeometry fg(n, uniform_angles(180));
    const auto img = fbp_reconstruct(forward_project(disk(n, radius, 1.0), fg), fg);
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t iy = 0; iy < n; ++iy) {
        for (std::size_t ix = 0; ix < n; ++ix) {
            const double x = static_cast<double>(ix) - 32.0;
            const double y = static_cast<double>(iy) - 32.0;
            if (std::sqrt(x * x + y * y) <= radius - 2.0) {
                sq += (img[iy * n + ix] - 1.0) * (img[iy * n + ix] - 1.0);
                ++count;
            }
        }
    }
    const double fbp_rmse = std::sqrt(sq / static_cast<double>(count));
    return {worst_adjoint <= 1e-5 && worst_chord <= 2.0 && fbp_rmse <= 0.1,
            fmt("adjoint rel err %.2e, chord err %.2f px (bound 2), FBP interior RMSE %.4f", worst_adjoint, worst_chord,
                fbp_rmse)};
}

Verdict commutation() {
    const auto bp = tiny_benchmark_phantom();
    const auto g = ScanGeometry::uniform(180, bp.geometry.num_rows(), bp.geometry.num_cols(), bp.geometry.flight_path());
    const auto truth = build_ground_truth(bp.spec, bp.axis);
    const auto p = normalize(simulate_scan(truth, g, bp.axis, bp.spec.flux, 0, SimulationOptions{false}));
    PipelineConfig cfg;
    cfg.subspace.rank = bp.spec.materials.size();
    cfg.subspace.max_iters = 5000;
    cfg.subspace.rel_tol = 1e-10;
    cfg.subspace.init = NmfInit::Nndsvd;
    cfg.recon = default_recon_options(ReconEngine::Fbp);
    const auto fhr = run_fhr(p, cfg);
    const auto dhr = run_dhr(p, cfg);
    const double err = test::relative_rmse(fhr.volume.voxels(), dhr.volume.voxels());
    return {err <= 0.02, fmt("N_s = %.0f, eps_frac %.2e, FHR vs DHR relative RMSE %.4f (need <= 0.02)",
                             static_cast<double>(cfg.subspace.rank), *fhr.report.epsilon_frac, err)};
}

Verdict physics() {
    const auto bp = tiny_benchmark_phantom();
    const auto truth = build_ground_truth(bp.spec, bp.axis);
    const auto ell = line_integrals(truth, bp.geometry);
    NormalizationOptions raw;
    raw.clamp_negative = false;
    const auto p = normalize(simulate_scan(truth, bp.geometry, bp.axis, 1e9, 1), raw);
    double sq = 0.0;
    double max_ell = 0.0;
    for (std::size_t i = 0; i < ell.size(); ++i) {
        const double d = static_cast<double>(p.values()[i]) - ell[i];
        sq += d * d;
        max_ell = std::max(max_ell, ell[i]);
    }
    const double rmse_frac = std::sqrt(sq / static_cast<double>(ell.size())) / max_ell;

    // lambda = h dt / (m_n L) with CODATA 2018 values.
    const double h = 6.62607015e-34;
    const double m = 1.67492749804e-27;
    double worst = 0.0;
    for (double L : {10.0, 16.0, 25.3}) {
        const ToFConverter c(L);
        for (double dt : test::random_doubles(50, 7, 1e-5, 5e-2)) {
            const double expected = h * dt / (m * L);
            worst = std::max(worst, std::fabs(tof_to_wavelength(c, dt) - expected) / expected);
        }
    }
    return {rmse_frac <= 0.01 && worst <= 1e-12,
            fmt("I_0 = 1e9 round trip RMSE %.2e of max (need <= 1e-2), ToF rel err %.2e", rmse_frac, worst)};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int hsnct_run(std::vector<std::string> args) {
    std::vector<const char*> argv{"hsnct"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) {
        std::cerr << err.str();
    }
    return code;
}

Verdict determinism() {
    test::TempDir dir;
    const auto d = [&](const std::string& name) { return (dir / name).string(); };
    int codes = 0;
    codes |= hsnct_run({"phantom", "--preset", "desk", "--out-truth", d("truth.hsnct"), "--out-geom", d("geom.json")});
    codes |= hsnct_run({"--seed", "20240917", "simulate", "--truth", d("truth.hsnct"), "--geom", d("geom.json"),
                        "--flux", "200", "--out", d("scan.hsnct")});
    codes |= hsnct_run({"normalize", "--scan", d("scan.hsnct"), "--out", d("p.hsnct")});
    for (const std::string tag : {"a", "b"}) {
        codes |= hsnct_run({"--threads", "1", "--seed", "7", "fhr", "--in", d("p.hsnct"), "--rank", "4", "--engine",
                            "mbir", "--out", d(tag + ".hsnct"), "--report", d(tag + ".json"), "--truth",
                            d("truth.hsnct")});
    }
    if (codes != 0) {
        return {false, "a CLI stage failed"};
    }
    auto ra = nlohmann::json::parse(slurp(dir / "a.json"));
    auto rb = nlohmann::json::parse(slurp(dir / "b.json"));
    ra.erase("timings");
    rb.erase("timings");
    const bool volumes = slurp(dir / "a.hsnct") == slurp(dir / "b.hsnct");
    const bool reports = ra == rb;
    return {volumes && reports, std::string("volumes ") + (volumes ? "bit-identical" : "DIFFER") + ", reports " +
                                    (reports ? "identical" : "DIFFER") + " (timings excluded)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"1 speedup, desk scale", speedup},
        {"2 SNR gain, desk scale", snr_gain},
        {"3 NMF correctness", nmf_suite},
        {"4 projector / adjoint / FBP", projector_suite},
        {"5 FBP pipeline commutation", commutation},
        {"6 physics round trip", physics},
        {"7 fhr determinism", determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v{false, ""};
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += v.pass ? 0 : 1;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  " << name << ": " << v.detail << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
    return failures == 0 ? 0 : 1;
}

#include "smart_cli/commands.hpp"

#include <smart/errors.hpp>
#include <smart/fitting.hpp>
#include <smart/io.hpp>
#include <smart/metrics.hpp>
#include <smart/parallel.hpp>
#include <smart/png_writer.hpp>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace smart::cli {

namespace {

using nlohmann::json;

// Independent stream per purpose so the mask and the noise never share draws.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kNoiseTag = 1;

void log_line(const CommandFlags& flags, const std::string& text) {
    if (flags.log) *flags.log << text << '\n' << std::flush;
}

fs::path prepare_out(const RunConfig& cfg) {
    const fs::path out(cfg.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    if (cfg.threads > 0) set_thread_count(cfg.threads);
    return out;
}

void echo_config(const RunConfig& cfg, const fs::path& out, const std::string& command) {
    json j = to_json(cfg);
    j["command"] = command;
    write_text(out / (command + "_config.json"), j.dump(2) + "\n");
}

double peak(const RealImage& img) {
    double m = 0.0;
    for (double v : img.data) m = std::max(m, v);
    return m;
}

void first_echo_png(const ImageSeries& x, const fs::path& path, double hi) {
    const RealImage mag = x.magnitude(0);
    emit_png(mag, path, {0.0, hi > 0.0 ? hi : std::max(peak(mag), 1e-30)});
}

SamplingMask build_mask(const RunConfig& cfg, const Grid& grid, int n_tsl) {
    const std::uint64_t seed = cfg.require_seed();
    if (cfg.mask.pattern == "poisson") return make_mask_poisson(grid, n_tsl, cfg.mask.r, cfg.mask.center, seed);
    return make_mask_1d(grid, n_tsl, cfg.mask.r, static_cast<int>(std::lround(cfg.mask.center)), seed);
}

std::string sidecar_dtype(const fs::path& raw) {
    const fs::path side = sidecar_path(raw);
    json j;
    try {
        j = json::parse(read_text(side));
    } catch (const json::parse_error& e) {
        throw DataError(side.string() + ": " + e.what());
    }
    if (!j.contains("dtype") || !j["dtype"].is_string()) throw DataError(side.string() + ": missing field 'dtype'");
    return j["dtype"].get<std::string>();
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

} // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    return 3;
}

void cmd_simulate(const RunConfig& cfg, const CommandFlags& flags) {
    cfg.require_seed();
    const fs::path out = prepare_out(cfg);
    cfg.phantom.validate();
    const Phantom ph = generate_phantom(cfg.phantom);
    write_series(out / "phantom.c64", ph.images);
    write_map(out / "t1rho.f32", ph.t1rho, "ms");
    write_map(out / "m0.f32", ph.m0, "a.u.");
    if (cfg.phantom.model == DecayModel::bi) {
        write_map(out / "t1rho_short.f32", ph.t1rho_short, "ms");
        write_map(out / "alpha.f32", ph.alpha, "fraction");
    }
    write_labels(out / "tubes.u16", ph.tube_of, ph.images.grid());
    first_echo_png(ph.images, out / "phantom_tsl0.png", 0.0);
    emit_png(ph.t1rho, out / "t1rho.png", {0.0, std::max(peak(ph.t1rho), 1.0)});
    echo_config(cfg, out, "simulate");
    const Grid& g = ph.images.grid();
    log_line(flags, "simulate: " + std::to_string(g.nx) + "x" + std::to_string(g.ny) + "x" + std::to_string(g.nz) +
                        ", " + std::to_string(ph.images.n_tsl()) + " TSLs, " + to_string(cfg.phantom.model) +
                        " model -> " + (out / "phantom.c64").string());
}

void cmd_mask(const RunConfig& cfg, const CommandFlags& flags) {
    const fs::path out = prepare_out(cfg);
    Grid grid = cfg.phantom.grid;
    int n_tsl = static_cast<int>(cfg.phantom.tsl_ms.size());
    if (!cfg.paths.images.empty()) {
        const ImageSeries src = read_series(cfg.paths.images);
        grid = src.grid();
        n_tsl = src.n_tsl();
    }
    const SamplingMask mask = build_mask(cfg, grid, n_tsl);
    write_mask(out / "mask.u8", mask);
    RealImage first(grid);
    for (Eigen::Index v = 0; v < grid.voxels(); ++v) first[v] = mask.sampled(v, 0) ? 1.0 : 0.0;
    emit_png(first, out / "mask_tsl0.png", {0.0, 1.0});
    echo_config(cfg, out, "mask");
    log_line(flags, "mask: pattern " + mask.pattern + ", R requested " + fmt(mask.r_requested) + ", achieved " +
                        fmt(mask.r_achieved()));
}

void cmd_recon(const RunConfig& cfg, const CommandFlags& flags) {
    const std::uint64_t seed = cfg.require_seed();
    const fs::path out = prepare_out(cfg);

    KSpaceData y;
    std::vector<double> tsl;
    ImageSeries reference;
    if (!cfg.paths.kspace.empty()) {
        if (cfg.paths.mask.empty()) throw ConfigError("paths.mask is required alongside paths.kspace");
        y = read_kspace(cfg.paths.kspace, read_mask(cfg.paths.mask));
        tsl = cfg.phantom.tsl_ms;
        if (static_cast<int>(tsl.size()) != y.n_tsl) {
            throw ConfigError("phantom.tsl_ms has " + std::to_string(tsl.size()) + " entries but " +
                              cfg.paths.kspace + " holds " + std::to_string(y.n_tsl) + " TSLs");
        }
        if (y.n_coils != 1) throw DataError(cfg.paths.kspace + ": multi-coil k-space needs sensitivity maps");
    } else {
        if (cfg.paths.images.empty()) throw ConfigError("recon needs paths.images (or paths.kspace with paths.mask)");
        reference = read_series(cfg.paths.images);
        tsl = reference.tsl_ms();
        const SamplingMask mask = cfg.paths.mask.empty() ? build_mask(cfg, reference.grid(), reference.n_tsl())
                                                         : read_mask(cfg.paths.mask);
        y = forward(reference, CoilSensitivities::identity(), mask);
        if (cfg.acquisition_snr > 0.0) y = add_noise(y, cfg.acquisition_snr, derive_seed(seed, kNoiseTag));
        log_line(flags, "recon: retrospective acquisition at R = " + fmt(mask.r_achieved()));
    }
    if (!cfg.paths.reference.empty()) reference = read_series(cfg.paths.reference);

    const auto start = std::chrono::steady_clock::now();
    ImageSeries x;
    ReconResult result;
    if (cfg.zero_filled) {
        x = zero_filled(y, CoilSensitivities::identity(), tsl);
    } else {
        const ReconConfig rc = cfg.recon_for(y.grid);
        const int total = rc.admm_iters;
        log_line(flags, "recon: mode " + to_string(rc.mode) + ", " + std::to_string(total) + " ADMM iterations");
        result = reconstruct(y, CoilSensitivities::identity(), tsl, rc, [&](const IterationRecord& r) {
            std::ostringstream os;
            os << "iter " << r.iteration << "/" << total << " rel_change "
               << (std::isnan(r.relative_change) ? std::string("-") : fmt(r.relative_change, 4)) << " data_residual "
               << fmt(r.data_residual, 4) << " cg " << r.cg_iterations << (r.cg_breakdown ? " (breakdown)" : "");
            log_line(flags, os.str());
        });
        x = result.x;
        write_text(out / "history.csv", history_csv(result.history));
        if (flags.dump_patches) {
            if (result.patches.groups.empty()) {
                log_line(flags, "recon: no patch groups in this mode; patches.json not written");
            } else {
                write_text(out / "patches.json", result.patches.to_json());
            }
        }
        if (flags.dump_tissues) {
            if (result.partition.labels.empty()) {
                log_line(flags, "recon: no tissue partition in this mode; tissues.u16 not written");
            } else {
                write_labels(out / "tissues.u16", result.partition.labels, result.partition.grid);
                write_text(out / "tissues.json", result.partition.edges_json() + "\n");
            }
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    write_series(out / "recon.c64", x);
    const double hi = reference.voxels() > 0 ? peak(reference.magnitude(0)) : 0.0;
    first_echo_png(x, out / "recon_tsl0.png", hi);
    if (reference.voxels() > 0) {
        require_same_grid(x.grid(), reference.grid(), "recon reference");
        RealImage err(x.grid());
        for (Eigen::Index v = 0; v < x.voxels(); ++v) err[v] = std::abs(std::abs(x.data()(v, 0)) - std::abs(reference.data()(v, 0)));
        emit_png(err, out / "error_tsl0.png", {0.0, hi > 0.0 ? hi : 1.0}, cfg.amplify_error);
        const MetricReport rep = evaluate(x, reference, cfg.paths.reference.empty() ? cfg.paths.images : cfg.paths.reference);
        write_text(out / "metrics.json", rep.to_json() + "\n");
        log_line(flags, "recon: nRMSE " + fmt(rep.nrmse, 5) + ", PSNR " + fmt(rep.psnr, 5) + " dB, SSIM " +
                            fmt(rep.ssim, 5) + ", HFEN " + fmt(rep.hfen, 5));
    }
    echo_config(cfg, out, "recon");
    log_line(flags, "recon: done in " + fmt(seconds, 4) + " s -> " + (out / "recon.c64").string());
}

void cmd_fit(const RunConfig& cfg, const CommandFlags& flags) {
    cfg.require_seed();
    const fs::path out = prepare_out(cfg);
    if (cfg.paths.images.empty()) throw ConfigError("fit needs paths.images");
    const ImageSeries x = read_series(cfg.paths.images);
    const BinaryImage support = support_from_first_echo(x.data(), x.grid(), cfg.fit_support_fraction);
    const MapFit fit = fit_map(x, support);
    write_map(out / "t1rho.f32", fit.t1rho, "ms");
    write_map(out / "m0.f32", fit.m0, "a.u.");
    write_text(out / "fit_qc.json", fit.qc.to_json() + "\n");
    emit_png(fit.t1rho, out / "t1rho.png", {0.0, std::max(peak(fit.t1rho), 1.0)});
    echo_config(cfg, out, "fit");
    log_line(flags, "fit: " + std::to_string(fit.qc.fitted) + " voxels, " + std::to_string(fit.qc.non_converged) +
                        " not converged, " + std::to_string(fit.qc.degenerate) + " degenerate, " +
                        std::to_string(fit.qc.clamped) + " clamped");
}

void cmd_rank_experiment(const RunConfig& cfg, const CommandFlags& flags) {
    const fs::path out = prepare_out(cfg);
    RankExperimentConfig rc = cfg.rank;
    rc.seed = cfg.require_seed();
    if (flags.full_runs) rc.runs = 1000;
    PhantomSpec spec = cfg.tubes_given ? cfg.phantom : scaled_standard(cfg.phantom.grid, cfg.phantom.tsl_ms, cfg.rank_model);
    spec.model = cfg.rank_model;
    const auto start = std::chrono::steady_clock::now();
    const auto rows = rank_experiment(spec, rc);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(out / "rank.csv", rank_csv(rows));
    echo_config(cfg, out, "rank_experiment");
    log_line(flags, "rank-experiment: " + std::to_string(rows.size()) + " rows, " + std::to_string(rc.runs) +
                        " runs per SNR, " + fmt(seconds, 4) + " s -> " + (out / "rank.csv").string());
}

void cmd_metrics(const RunConfig& cfg, const CommandFlags& flags) {
    const fs::path out = prepare_out(cfg);
    if (cfg.paths.images.empty() || cfg.paths.reference.empty()) {
        throw ConfigError("metrics needs paths.images and paths.reference");
    }
    const std::string dtype = sidecar_dtype(cfg.paths.images);
    const std::string ref_dtype = sidecar_dtype(cfg.paths.reference);
    if (dtype != ref_dtype) {
        throw DataError("metrics: " + cfg.paths.images + " is " + dtype + " but " + cfg.paths.reference + " is " +
                        ref_dtype);
    }
    std::string json_text;
    std::string csv_text;
    double n = 0.0;
    double s = 0.0;
    if (dtype == "c64le") {
        const MetricReport rep = evaluate(read_series(cfg.paths.images), read_series(cfg.paths.reference),
                                          cfg.paths.reference);
        json_text = rep.to_json();
        csv_text = rep.to_csv();
        n = rep.nrmse;
        s = rep.ssim;
    } else if (dtype == "f32le") {
        const RealImage x = read_map(cfg.paths.images);
        const RealImage ref = read_map(cfg.paths.reference);
        require_same_grid(x.grid, ref.grid, "metrics");
        n = nrmse(x, ref);
        s = ssim(x, ref);
        const double p = psnr(x, ref);
        const double h = hfen(x, ref);
        json j = {{"reference", cfg.paths.reference}, {"kind", "map"}, {"nrmse", n}, {"psnr", p}, {"ssim", s}, {"hfen", h}};
        json_text = j.dump(2);
        std::ostringstream os;
        os << std::setprecision(17) << "metric,value\nnrmse," << n << "\npsnr," << p << "\nssim," << s << "\nhfen," << h
           << "\n";
        csv_text = os.str();
    } else {
        throw DataError("metrics: unsupported dtype '" + dtype + "'");
    }
    write_text(out / "metrics.json", json_text + "\n");
    write_text(out / "metrics.csv", csv_text);
    log_line(flags, "metrics: nRMSE " + fmt(n, 5) + ", SSIM " + fmt(s, 5));
}

} // namespace smart::cli

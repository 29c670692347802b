#include "smart_cli/commands.hpp"

#include <smart/errors.hpp>
#include <smart/solver.hpp>

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <optional>

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string out;
    std::optional<double> amplify;
    std::optional<int> threads;
    std::string model;
    std::string images;
    std::string reference;
    std::string mask;
    std::string kspace;
};

smart::cli::RunConfig resolve(const Overrides& o) {
    using namespace smart::cli;
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.seed) cfg.seed = o.seed;
    if (!o.out.empty()) cfg.out = o.out;
    if (o.amplify) {
        if (!(*o.amplify > 0.0)) throw smart::ConfigError("--amplify-error must be positive");
        cfg.amplify_error = *o.amplify;
    }
    if (o.threads) {
        if (*o.threads < 1) throw smart::ConfigError("--threads must be >= 1");
        cfg.threads = *o.threads;
    }
    if (!o.mode.empty()) {
        cfg.zero_filled = o.mode == "zero-filled";
        if (!cfg.zero_filled) {
            smart::parse_mode(o.mode);
            cfg.recon_overrides["mode"] = o.mode;
        } else {
            cfg.recon_overrides.erase("mode");
        }
    }
    if (!o.model.empty()) {
        const auto model = parse_model(o.model);
        cfg.rank_model = model;
        if (cfg.tubes_given) {
            cfg.phantom.model = model;
        } else {
            cfg.phantom = scaled_standard(cfg.phantom.grid, cfg.phantom.tsl_ms, model);
        }
    }
    if (!o.images.empty()) cfg.paths.images = o.images;
    if (!o.reference.empty()) cfg.paths.reference = o.reference;
    if (!o.mask.empty()) cfg.paths.mask = o.mask;
    if (!o.kspace.empty()) cfg.paths.kspace = o.kspace;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    using namespace smart::cli;
    CLI::App app{"Quantitative T1rho reconstruction from undersampled k-space"};
    app.require_subcommand(1);

    Overrides o;
    CommandFlags flags;
    flags.log = &std::cerr;
    bool quiet = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Seed (overrides the config)");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--threads", o.threads, "Worker threads (falls back to SMART_THREADS)");
        sub->add_flag("--quiet", quiet, "No progress output");
    };

    using Runner = std::function<void(const RunConfig&, const CommandFlags&)>;
    std::map<CLI::App*, Runner> runners;

    auto* simulate = app.add_subcommand("simulate", "Write the numerical phantom and its ground-truth maps");
    common(simulate);
    simulate->add_option("--model", o.model, "Decay model: mono or bi");
    runners[simulate] = cmd_simulate;

    auto* mask = app.add_subcommand("mask", "Generate per-TSL sampling masks");
    common(mask);
    mask->add_option("--images", o.images, "Series whose geometry the mask should match");
    runners[mask] = cmd_mask;

    auto* recon = app.add_subcommand("recon", "Reconstruct an image series");
    common(recon);
    recon->add_option("--mode", o.mode, "smart, spatial-only, parametric-only or zero-filled");
    recon->add_option("--images", o.images, "Fully sampled series to undersample retrospectively");
    recon->add_option("--reference", o.reference, "Ground truth for metrics and the error map");
    recon->add_option("--mask", o.mask, "Sampling mask file");
    recon->add_option("--kspace", o.kspace, "Measured k-space file (needs --mask)");
    recon->add_flag("--dump-patches", flags.dump_patches, "Write the final patch groups as JSON");
    recon->add_flag("--dump-tissues", flags.dump_tissues, "Write the final tissue partition");
    recon->add_option("--amplify-error", o.amplify, "Error map amplification (default 10)");
    runners[recon] = cmd_recon;

    auto* fit = app.add_subcommand("fit", "Fit a T1rho map to an image series");
    common(fit);
    fit->add_option("--images", o.images, "Series to fit");
    runners[fit] = cmd_fit;

    auto* rank = app.add_subcommand("rank-experiment", "Monte-Carlo Hankel rank study on the phantom");
    common(rank);
    rank->add_option("--model", o.model, "Decay model: mono or bi");
    rank->add_flag("--full", flags.full_runs, "1000 runs per SNR");
    runners[rank] = cmd_rank_experiment;

    auto* metrics = app.add_subcommand("metrics", "Compare a series or map against a reference");
    common(metrics);
    metrics->add_option("--images", o.images, "Series or map to score");
    metrics->add_option("--reference", o.reference, "Reference of the same kind");
    runners[metrics] = cmd_metrics;

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (quiet) flags.log = nullptr;

    CLI::App* chosen = app.get_subcommands().front();
    try {
        const RunConfig cfg = resolve(o);
        runners.at(chosen)(cfg, flags);
    } catch (const std::exception& e) {
        std::cerr << chosen->get_name() << ": error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}

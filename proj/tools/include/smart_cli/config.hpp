#pragma once

#include <smart/phantom.hpp>
#include <smart/solver.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace smart::cli {

struct MaskSettings {
    std::string pattern = "1d"; // "1d" or "poisson"
    double r = 4.0;
    double center = -1.0; // negative selects the pattern default
};

struct Paths {
    std::string images;    // complex series input (recon source, fit, metrics)
    std::string reference; // ground truth for metrics and error maps
    std::string mask;
    std::string kspace;
};

/// Everything a subcommand can be configured with. Sections mirror the library
/// types; unknown keys anywhere are rejected.
struct RunConfig {
    std::optional<std::uint64_t> seed;
    int threads = 0; // 0 defers to SMART_THREADS
    std::string out = ".";

    PhantomSpec phantom = PhantomSpec::standard();
    bool tubes_given = false;

    MaskSettings mask;
    double acquisition_snr = 0.0; // 0 keeps k-space noiseless

    nlohmann::json recon_overrides = nlohmann::json::object();
    bool zero_filled = false; // recon --mode zero-filled

    RankExperimentConfig rank;
    DecayModel rank_model = DecayModel::mono;

    double fit_support_fraction = 0.05;
    double amplify_error = 10.0;

    Paths paths;

    /// Recon defaults for `grid` with the config's overrides applied.
    [[nodiscard]] ReconConfig recon_for(const Grid& grid) const;
    /// Throws ConfigError if no seed was set by the file or the command line.
    std::uint64_t require_seed() const;
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Standard five-tube layout scaled to the grid (ring and radius scale with
/// min(nx, ny) / 192).
PhantomSpec scaled_standard(const Grid& grid, const std::vector<double>& tsl_ms, DecayModel model);

DecayModel parse_model(const std::string& name);
std::string to_string(DecayModel model);

/// Effective configuration, echoed next to every output.
nlohmann::json to_json(const RunConfig& cfg);

} // namespace smart::cli

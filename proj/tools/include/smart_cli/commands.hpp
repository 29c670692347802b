#pragma once

#include "smart_cli/config.hpp"

#include <iosfwd>

namespace smart::cli {

struct CommandFlags {
    bool dump_patches = false;
    bool dump_tissues = false;
    bool full_runs = false; // rank-experiment: 1000 runs per SNR
    std::ostream* log = nullptr; // progress lines; nullptr silences them
};

// Each command writes into cfg.out and throws smart::Error subclasses on failure.
void cmd_simulate(const RunConfig& cfg, const CommandFlags& flags);
void cmd_mask(const RunConfig& cfg, const CommandFlags& flags);
void cmd_recon(const RunConfig& cfg, const CommandFlags& flags);
void cmd_fit(const RunConfig& cfg, const CommandFlags& flags);
void cmd_rank_experiment(const RunConfig& cfg, const CommandFlags& flags);
void cmd_metrics(const RunConfig& cfg, const CommandFlags& flags);

/// Maps an exception to the process exit code: 2 config, 3 data, 4 numerical.
int exit_code_for(const std::exception& e);

} // namespace smart::cli

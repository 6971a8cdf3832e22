#pragma once

// Command-line entry points. Every command returns a process exit code and
// writes diagnostics to `err` instead of throwing.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace fsrl::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

struct TrainArgs {
    std::string mode = "hybrid";
    int episodes = 10000;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> config;  // default: shipped default.json, else built-in values
    std::filesystem::path out = "runs/latest";
    int workers = 1;
    int checkpoint_every = 0;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

// Simulates a stored flowsheet and prints its streams and economics.
int cmd_simulate(const std::filesystem::path& flowsheet, const std::optional<std::filesystem::path>& config,
                 std::ostream& out, std::ostream& err);

int cmd_export_dot(const std::filesystem::path& flowsheet, const std::filesystem::path& out_path, std::ostream& err);

// Parses argv (subcommands train | simulate | export-dot) and dispatches.
int run(int argc, const char* const* argv);

// Applies FSRL_LOG_LEVEL (trace, debug, info, warn, error, off) if set.
void configure_logging();

}  // namespace fsrl::cli

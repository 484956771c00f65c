#ifndef MOU_COMMANDS_HPP
#define MOU_COMMANDS_HPP

/**
 * @file commands.hpp
 * @brief Orchestration of the estimate -> solve -> schedule / montecarlo
 *        pipelines behind the CLI.
 *
 * Every command writes its outputs plus a manifest.json capturing the fully
 * resolved inputs, so a run can be reproduced from the manifest alone
 * (run_from_manifest). All command outputs are deterministic; wall-clock
 * timing lives only in the manifest.
 */

#include <optional>
#include <string>

#include "mou/io.hpp"

namespace mou {

inline constexpr const char* kToolName = "ouexec";
inline constexpr const char* kToolVersion = "0.1.0";

struct EstimateOptions {
    std::string pricesCsv;
    std::string outDir;
};

struct SolveCmdOptions {
    std::string paramsFile;
    std::string execFile;
    int steps = 5000;
    std::string outDir;
};

struct ScheduleOptions {
    std::string paramsFile;
    std::string execFile;
    std::string solutionCsv;  // required for kind = OptimalOU / Scaled(OptimalOU)
    std::string pricesCsv;    // historical rollout when set
    bool simulate = false;    // simulated rollout otherwise
    int simSteps = 840;
    std::uint64_t seed = 1;
    std::string q0;  // comma-separated shares
    std::string s0;  // comma-separated prices; defaults to Sbar
    double x0 = 0.0;
    std::string mode = "liquidation";
    std::string strategyFile;        // StrategyConfig JSON; overrides kind
    std::string kind = "OptimalOU";  // shorthand when no strategy file given
    std::string outDir;
};

struct MonteCarloCmdOptions {
    std::string paramsFile;
    std::string execFile;
    std::string solutionCsv;
    int paths = 1500;
    std::uint64_t seed = 1;
    int steps = 840;
    int threads = 0;
    std::string q0;
    std::string s0;
    double x0 = 0.0;
    std::string mode = "statarb";
    std::string strategyFile;
    std::string kind = "OptimalOU";
    std::string outDir;
};

struct MertonCmdOptions {
    std::string paramsFile;
    double gamma = 0.0;  // 0 = read from exec file if given
    std::string execFile;
    double T = 0.0;
    int steps = 100;
    std::string s0;
    std::string outDir;
};

void cmd_estimate(const EstimateOptions& opts);
void cmd_solve(const SolveCmdOptions& opts);
void cmd_schedule(const ScheduleOptions& opts);
void cmd_montecarlo(const MonteCarloCmdOptions& opts);
void cmd_merton(const MertonCmdOptions& opts);

/// Re-execute a recorded run. outOverride, when set, redirects the outputs.
void run_from_manifest(const std::string& manifestFile,
                       const std::optional<std::string>& outOverride = std::nullopt);

}  // namespace mou

#endif  // MOU_COMMANDS_HPP

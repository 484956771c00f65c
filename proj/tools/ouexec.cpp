// ouexec: estimate OU dynamics from prices, solve the execution ODE system,
// roll out trading schedules and run Monte Carlo PnL studies.

#include <cstdio>
#include <exception>
#include <optional>
#include <stdexcept>

#include <CLI11.hpp>

#include "mou/commands.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"Multi-asset optimal execution and statistical arbitrage under "
                 "mean-reverting (multivariate OU) price dynamics"};
    app.require_subcommand(1);

    // estimate
    mou::EstimateOptions est;
    auto* cEst = app.add_subcommand("estimate", "Fit OU parameters from a price CSV");
    cEst->add_option("--prices", est.pricesCsv, "price CSV (header: time,<names>)")->required();
    cEst->add_option("--out", est.outDir, "output directory")->required();

    // solve
    mou::SolveCmdOptions slv;
    auto* cSlv = app.add_subcommand("solve", "Solve the backward ODE system");
    cSlv->add_option("--params", slv.paramsFile, "OUParams JSON")->required();
    cSlv->add_option("--exec", slv.execFile, "ExecutionSpec JSON")->required();
    cSlv->add_option("--steps", slv.steps, "grid steps (default 5000)");
    cSlv->add_option("--out", slv.outDir, "output directory")->required();

    // schedule
    mou::ScheduleOptions sch;
    auto* cSch = app.add_subcommand("schedule", "Roll a strategy into a trading schedule");
    cSch->add_option("--params", sch.paramsFile, "OUParams JSON")->required();
    cSch->add_option("--exec", sch.execFile, "ExecutionSpec JSON")->required();
    cSch->add_option("--solution", sch.solutionCsv, "riccati.csv from solve");
    cSch->add_option("--prices", sch.pricesCsv, "historical price CSV");
    cSch->add_flag("--simulate", sch.simulate, "simulate a price path instead");
    cSch->add_option("--sim-steps", sch.simSteps, "simulation steps (default 840)");
    cSch->add_option("--seed", sch.seed, "simulation seed");
    cSch->add_option("--q0", sch.q0, "initial inventory, comma-separated");
    cSch->add_option("--s0", sch.s0, "initial price, comma-separated (default Sbar)");
    cSch->add_option("--x0", sch.x0, "initial cash");
    cSch->add_option("--mode", sch.mode, "liquidation|statarb")
        ->check(CLI::IsMember({"liquidation", "statarb"}));
    cSch->add_option("--strategy", sch.strategyFile, "StrategyConfig JSON");
    cSch->add_option("--kind", sch.kind, "OptimalOU|AlmgrenChriss|Merton|TWAP");
    cSch->add_option("--out", sch.outDir, "output directory")->required();

    // montecarlo
    mou::MonteCarloCmdOptions mc;
    auto* cMc = app.add_subcommand("montecarlo", "Monte Carlo PnL distribution");
    cMc->add_option("--params", mc.paramsFile, "OUParams JSON")->required();
    cMc->add_option("--exec", mc.execFile, "ExecutionSpec JSON")->required();
    cMc->add_option("--solution", mc.solutionCsv, "riccati.csv from solve");
    cMc->add_option("--paths", mc.paths, "number of simulated paths (default 1500)");
    cMc->add_option("--seed", mc.seed, "master seed");
    cMc->add_option("--steps", mc.steps, "simulation steps per path (default 840)");
    cMc->add_option("--threads", mc.threads, "worker threads (0 = auto)");
    cMc->add_option("--q0", mc.q0, "initial inventory, comma-separated");
    cMc->add_option("--s0", mc.s0, "initial price (default Sbar)");
    cMc->add_option("--x0", mc.x0, "initial cash");
    cMc->add_option("--mode", mc.mode, "liquidation|statarb")
        ->check(CLI::IsMember({"liquidation", "statarb"}));
    cMc->add_option("--strategy", mc.strategyFile, "StrategyConfig JSON");
    cMc->add_option("--kind", mc.kind, "OptimalOU|AlmgrenChriss|Merton|TWAP");
    cMc->add_option("--out", mc.outDir, "output directory")->required();

    // merton
    mou::MertonCmdOptions mer;
    auto* cMer = app.add_subcommand("merton", "Frictionless-limit closed form");
    cMer->add_option("--params", mer.paramsFile, "OUParams JSON")->required();
    cMer->add_option("--gamma", mer.gamma, "risk aversion");
    cMer->add_option("--exec", mer.execFile, "ExecutionSpec JSON (gamma/T fallback)");
    cMer->add_option("--horizon", mer.T, "horizon in days");
    cMer->add_option("--steps", mer.steps, "output grid steps (default 100)");
    cMer->add_option("--s0", mer.s0, "evaluation price (default Sbar)");
    cMer->add_option("--out", mer.outDir, "output directory")->required();

    // rerun
    std::string manifestFile;
    std::string rerunOut;
    auto* cRerun = app.add_subcommand("rerun", "Re-execute a recorded manifest");
    cRerun->add_option("manifest", manifestFile, "manifest.json from a previous run")->required();
    cRerun->add_option("--out", rerunOut, "override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return 2;
    }

    if (cEst->parsed()) mou::cmd_estimate(est);
    if (cSlv->parsed()) mou::cmd_solve(slv);
    if (cSch->parsed()) mou::cmd_schedule(sch);
    if (cMc->parsed()) mou::cmd_montecarlo(mc);
    if (cMer->parsed())
        mou::cmd_merton(mer);
    if (cRerun->parsed())
        mou::run_from_manifest(manifestFile, rerunOut.empty()
                                                 ? std::nullopt
                                                 : std::optional<std::string>(rerunOut));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mou::validation_error& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const mou::numerical_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const mou::io_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

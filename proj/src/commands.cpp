#include "mou/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mou/closed_form.hpp"
#include "mou/estimation.hpp"
#include "mou/matrix_kit.hpp"

namespace mou {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw validation_error("an output directory is required (--out)");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory " + dir + ": " + ec.message());
}

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void write_manifest(const std::string& outDir, const std::string& command,
                    ordered_json options, ordered_json resolved, double timingMs) {
    ordered_json m;
    m["tool"] = kToolName;
    m["tool_version"] = kToolVersion;
    m["command"] = command;
    m["options"] = std::move(options);
    m["resolved"] = std::move(resolved);
    m["out_dir"] = outDir;
    m["timing_ms"] = timingMs;  // informational; excluded from reproducibility
    write_json_file(join(outDir, "manifest.json"), m);
}

Eigen::VectorXd resolve_s0(const std::string& s0, const OUParams& ou) {
    if (s0.empty()) return ou.Sbar;
    Eigen::VectorXd v = parse_vector(s0);
    if (v.size() != ou.d) throw validation_error("--s0 dimension does not match the model");
    return v;
}

Eigen::VectorXd resolve_q0(const std::string& q0, Eigen::Index d) {
    if (q0.empty()) return Eigen::VectorXd::Zero(d);
    Eigen::VectorXd v = parse_vector(q0);
    if (v.size() != d) throw validation_error("--q0 dimension does not match the model");
    return v;
}

StrategyConfig resolve_config(const std::string& strategyFile, const std::string& kind,
                              const std::string& mode) {
    StrategyConfig cfg;
    if (!strategyFile.empty()) {
        cfg = strategy_config_from_json(read_json_file(strategyFile));
    } else {
        cfg.kind = strategy_kind_from_string(kind);
    }
    cfg.mode = trading_mode_from_string(mode);
    return cfg;
}

struct LoadedStrategy {
    StrategyConfig config;
    StrategyInputs inputs;
    ExecutionSpec execEffective;
    Control control;
};

LoadedStrategy load_strategy(const StrategyConfig& cfg, const OUParams& ou,
                             const ExecutionSpec& exec, const std::string& solutionCsv,
                             const Eigen::VectorXd& q0, double trackingDt) {
    LoadedStrategy out;
    out.config = cfg;
    out.inputs.exec = exec;
    out.inputs.q0 = cfg.apply_mode_q0(q0);
    out.inputs.trackingDt = trackingDt;
    out.execEffective = cfg.apply_mode(exec);

    const StrategyKind effective = cfg.kind == StrategyKind::Scaled ? cfg.base : cfg.kind;
    if (effective == StrategyKind::OptimalOU) {
        if (solutionCsv.empty())
            throw validation_error("this strategy needs --solution <riccati.csv>");
        out.inputs.solution =
            std::make_shared<RiccatiSolution>(read_riccati_csv(solutionCsv));
    } else if (effective == StrategyKind::AlmgrenChriss) {
        out.inputs.brownian = std::make_shared<BrownianClosedForm>(
            OUParams::brownian(ou.Sigma), out.execEffective);
    } else if (effective == StrategyKind::Merton) {
        out.inputs.merton = std::make_shared<MertonSolution>(ou, exec.gamma, exec.T);
    }
    out.control = build_strategy(cfg, out.inputs);
    return out;
}

ordered_json trace_summary_json(const ExecutionTrace& tr, const ExecutionSpec& exec) {
    double cost = 0.0;
    const double dt = tr.grid.dt();
    for (int k = 0; k < tr.grid.N; ++k) {
        const Eigen::VectorXd v = tr.v.row(k).transpose();
        cost += v.dot(exec.eta * v) * dt;
    }
    ordered_json j;
    j["terminal_inventory"] = to_json(Eigen::VectorXd(tr.q.bottomRows(1).transpose()));
    j["terminal_pnl"] = tr.pnl[tr.grid.N];
    j["execution_cost"] = cost;
    j["grid"] = {{"T", tr.grid.T}, {"N", tr.grid.N}};
    return j;
}

}  // namespace

void cmd_estimate(const EstimateOptions& opts) {
    const auto start = Clock::now();
    ensure_out_dir(opts.outDir);

    std::string timeFormat;
    std::vector<std::string> names;
    const MarketPath path = read_price_csv(opts.pricesCsv, &timeFormat, &names);

    const VAR1Fit fit = fit_var1(path);
    const OUParams ou = var1_to_ou(fit);
    const Eigen::MatrixXd sigmaAC = fit_bachelier(path);

    write_json_file(join(opts.outDir, "params.json"), to_json(ou));

    ordered_json diag;
    diag["assets"] = names;
    diag["time_format"] = timeFormat;
    diag["var1"] = to_json(fit);
    diag["bachelier_SigmaAC"] = to_json(sigmaAC);
    if (ou.d >= 2 && ou.d <= 5) {
        try {
            diag["johansen"] = to_json(johansen_trace(path));
        } catch (const numerical_error& e) {
            diag["johansen"] = ordered_json{{"error", e.what()}};
        }
    } else if (ou.d > 5) {
        diag["johansen"] = "skipped: supported only for d <= 5";
    }
    write_json_file(join(opts.outDir, "diagnostics.json"), diag);

    ordered_json options{{"prices", opts.pricesCsv}, {"out", opts.outDir}};
    ordered_json resolved{{"params", to_json(ou)}, {"time_format", timeFormat}};
    write_manifest(opts.outDir, "estimate", options, resolved, elapsed_ms(start));
}

void cmd_solve(const SolveCmdOptions& opts) {
    const auto start = Clock::now();
    ensure_out_dir(opts.outDir);

    const OUParams ou = ou_params_from_json(read_json_file(opts.paramsFile));
    const ExecutionSpec exec = execution_spec_from_json(read_json_file(opts.execFile));
    require_valid(ou, exec);

    const TimeGrid grid(exec.T, opts.steps);
    const RiccatiSolution sol = solve_backward(ou, exec, grid);
    write_riccati_csv(join(opts.outDir, "riccati.csv"), sol);

    ordered_json summary = solution_summary_json(sol);
    if (ou.R.isZero(0.0) && min_eigenvalue(symmetrize(ou.Sigma)) > 0.0) {
        // Cross-check against the closed form available in the driftless case.
        const BrownianClosedForm cf(ou, exec);
        double worst = 0.0, scale = 0.0;
        for (int k = 0; k <= grid.N; k += std::max(1, grid.N / 512)) {
            const Eigen::MatrixXd ref = cf.A(grid.times[static_cast<std::size_t>(k)]);
            worst = std::max(
                worst,
                (sol.states[static_cast<std::size_t>(k)].A - ref).cwiseAbs().maxCoeff());
            scale = std::max(scale, ref.cwiseAbs().maxCoeff());
        }
        summary["closed_form_residual"] = worst / std::max(scale, 1e-300);
    }
    write_json_file(join(opts.outDir, "solution.json"), summary);

    ordered_json options{{"params", opts.paramsFile},
                         {"exec", opts.execFile},
                         {"steps", opts.steps},
                         {"out", opts.outDir}};
    ordered_json resolved{{"params", to_json(ou)}, {"exec", to_json(exec)}};
    write_manifest(opts.outDir, "solve", options, resolved, elapsed_ms(start));
}

void cmd_schedule(const ScheduleOptions& opts) {
    const auto start = Clock::now();
    ensure_out_dir(opts.outDir);
    if (opts.pricesCsv.empty() && !opts.simulate)
        throw validation_error("schedule needs a price CSV or --simulate");

    const OUParams ou = ou_params_from_json(read_json_file(opts.paramsFile));
    const ExecutionSpec exec = execution_spec_from_json(read_json_file(opts.execFile));
    require_valid(ou, exec);

    const StrategyConfig cfg = resolve_config(opts.strategyFile, opts.kind, opts.mode);
    const Eigen::VectorXd q0 = resolve_q0(opts.q0, ou.d);
    const double trackingDt =
        opts.pricesCsv.empty() ? exec.T / opts.simSteps : 0.0;  // refined below for historical

    std::string timeFormat = "none";
    ExecutionTrace trace;
    if (!opts.pricesCsv.empty()) {
        const MarketPath path = read_price_csv(opts.pricesCsv, &timeFormat);
        const double dt =
            (path.times[path.times.size() - 1] - path.times[0]) / double(path.n() - 1);
        const LoadedStrategy st =
            load_strategy(cfg, ou, exec, opts.solutionCsv, q0, dt);
        ExecutionState initial(0.0, st.inputs.q0, path.prices.row(0).transpose());
        initial.X = opts.x0;
        trace = rollout(st.control, ou, st.execEffective, initial, path);
    } else {
        const LoadedStrategy st = load_strategy(cfg, ou, exec, opts.solutionCsv, q0, trackingDt);
        ExecutionState initial(0.0, st.inputs.q0, resolve_s0(opts.s0, ou));
        initial.X = opts.x0;
        trace = rollout_simulated(st.control, ou, st.execEffective, initial,
                                  TimeGrid(exec.T, opts.simSteps), opts.seed);
    }

    write_trace_csv(join(opts.outDir, "trace.csv"), trace);
    ordered_json summary = trace_summary_json(trace, exec);
    summary["mode"] = opts.mode;
    summary["strategy"] = to_string(cfg.kind);
    write_json_file(join(opts.outDir, "summary.json"), summary);

    ordered_json options{{"params", opts.paramsFile}, {"exec", opts.execFile},
                         {"solution", opts.solutionCsv}, {"prices", opts.pricesCsv},
                         {"simulate", opts.simulate},   {"sim_steps", opts.simSteps},
                         {"seed", opts.seed},           {"q0", opts.q0},
                         {"s0", opts.s0},               {"x0", opts.x0},
                         {"mode", opts.mode},           {"strategy_file", opts.strategyFile},
                         {"kind", opts.kind},           {"out", opts.outDir}};
    ordered_json resolved{{"params", to_json(ou)},
                          {"exec", to_json(exec)},
                          {"strategy", to_json(cfg)},
                          {"time_format", timeFormat}};
    write_manifest(opts.outDir, "schedule", options, resolved, elapsed_ms(start));
}

void cmd_montecarlo(const MonteCarloCmdOptions& opts) {
    const auto start = Clock::now();
    ensure_out_dir(opts.outDir);

    const OUParams ou = ou_params_from_json(read_json_file(opts.paramsFile));
    const ExecutionSpec exec = execution_spec_from_json(read_json_file(opts.execFile));
    require_valid(ou, exec);

    const StrategyConfig cfg = resolve_config(opts.strategyFile, opts.kind, opts.mode);
    const Eigen::VectorXd q0 = resolve_q0(opts.q0, ou.d);
    const TimeGrid grid(exec.T, opts.steps);
    const LoadedStrategy st = load_strategy(cfg, ou, exec, opts.solutionCsv, q0, grid.dt());

    ExecutionState initial(0.0, st.inputs.q0, resolve_s0(opts.s0, ou));
    initial.X = opts.x0;

    MonteCarloConfig mc;
    mc.nPaths = opts.paths;
    mc.seed = opts.seed;
    mc.nThreads = opts.threads;
    const PnLSummary summary =
        monte_carlo_pnl(st.control, ou, st.execEffective, initial, grid, mc);

    write_json_file(join(opts.outDir, "pnl_summary.json"), to_json(summary));
    write_histogram_csv(join(opts.outDir, "histogram.csv"), summary);

    ordered_json options{{"params", opts.paramsFile}, {"exec", opts.execFile},
                         {"solution", opts.solutionCsv}, {"paths", opts.paths},
                         {"seed", opts.seed},           {"steps", opts.steps},
                         {"threads", opts.threads},     {"q0", opts.q0},
                         {"s0", opts.s0},               {"x0", opts.x0},
                         {"mode", opts.mode},           {"strategy_file", opts.strategyFile},
                         {"kind", opts.kind},           {"out", opts.outDir}};
    ordered_json resolved{{"params", to_json(ou)},
                          {"exec", to_json(exec)},
                          {"strategy", to_json(cfg)}};
    write_manifest(opts.outDir, "montecarlo", options, resolved, elapsed_ms(start));
}

void cmd_merton(const MertonCmdOptions& opts) {
    const auto start = Clock::now();
    ensure_out_dir(opts.outDir);

    const OUParams ou = ou_params_from_json(read_json_file(opts.paramsFile));
    double gamma = opts.gamma;
    double T = opts.T;
    if ((!(gamma > 0.0) || !(T > 0.0)) && !opts.execFile.empty()) {
        const ExecutionSpec exec = execution_spec_from_json(read_json_file(opts.execFile));
        if (!(gamma > 0.0)) gamma = exec.gamma;
        if (!(T > 0.0)) T = exec.T;
    }
    if (!(gamma > 0.0) || !(T > 0.0))
        throw validation_error("merton needs --gamma and --horizon (or an --exec file)");

    const MertonSolution merton(ou, gamma, T);
    const Eigen::VectorXd S0 = resolve_s0(opts.s0, ou);
    const Eigen::Index d = ou.d;

    std::ofstream out(join(opts.outDir, "merton.csv"));
    if (!out) throw io_error("cannot open merton.csv for writing");
    out << "t";
    for (Eigen::Index i = 1; i <= d; ++i)
        for (Eigen::Index j = 1; j <= d; ++j) out << ",Chat_" << i << '_' << j;
    for (Eigen::Index i = 1; i <= d; ++i) out << ",Ehat_" << i;
    out << ",Fhat";
    for (Eigen::Index i = 1; i <= d; ++i) out << ",qstar_" << i;
    out << '\n';
    for (int k = 0; k <= opts.steps; ++k) {
        const double t = T * k / opts.steps;
        const Eigen::MatrixXd C = merton.Chat(t);
        const Eigen::VectorXd E = merton.Ehat(t);
        const Eigen::VectorXd qs = merton.position(t, S0);
        out << format_double(t);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(C(i, j));
        for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(E[i]);
        out << ',' << format_double(merton.Fhat(t));
        for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(qs[i]);
        out << '\n';
    }
    out.close();

    ordered_json summary{{"gamma", gamma},
                         {"T", T},
                         {"S0", to_json(S0)},
                         {"position_at_0", to_json(merton.position(0.0, S0))},
                         {"theta_at_0", merton.theta(0.0, S0)}};
    write_json_file(join(opts.outDir, "merton.json"), summary);

    ordered_json options{{"params", opts.paramsFile}, {"exec", opts.execFile},
                         {"gamma", opts.gamma},       {"horizon", opts.T},
                         {"steps", opts.steps},       {"s0", opts.s0},
                         {"out", opts.outDir}};
    ordered_json resolved{{"params", to_json(ou)}, {"gamma", gamma}, {"T", T}};
    write_manifest(opts.outDir, "merton", options, resolved, elapsed_ms(start));
}

void run_from_manifest(const std::string& manifestFile,
                       const std::optional<std::string>& outOverride) {
    const ordered_json m = read_json_file(manifestFile);
    const std::string command = m.at("command").get<std::string>();
    const ordered_json& o = m.at("options");
    const std::string outDir = outOverride.value_or(o.at("out").get<std::string>());

    if (command == "estimate") {
        cmd_estimate({o.at("prices").get<std::string>(), outDir});
    } else if (command == "solve") {
        cmd_solve({o.at("params").get<std::string>(), o.at("exec").get<std::string>(),
                   o.at("steps").get<int>(), outDir});
    } else if (command == "schedule") {
        ScheduleOptions s;
        s.paramsFile = o.at("params").get<std::string>();
        s.execFile = o.at("exec").get<std::string>();
        s.solutionCsv = o.at("solution").get<std::string>();
        s.pricesCsv = o.at("prices").get<std::string>();
        s.simulate = o.at("simulate").get<bool>();
        s.simSteps = o.at("sim_steps").get<int>();
        s.seed = o.at("seed").get<std::uint64_t>();
        s.q0 = o.at("q0").get<std::string>();
        s.s0 = o.at("s0").get<std::string>();
        s.x0 = o.at("x0").get<double>();
        s.mode = o.at("mode").get<std::string>();
        s.strategyFile = o.at("strategy_file").get<std::string>();
        s.kind = o.at("kind").get<std::string>();
        s.outDir = outDir;
        cmd_schedule(s);
    } else if (command == "montecarlo") {
        MonteCarloCmdOptions s;
        s.paramsFile = o.at("params").get<std::string>();
        s.execFile = o.at("exec").get<std::string>();
        s.solutionCsv = o.at("solution").get<std::string>();
        s.paths = o.at("paths").get<int>();
        s.seed = o.at("seed").get<std::uint64_t>();
        s.steps = o.at("steps").get<int>();
        s.threads = o.at("threads").get<int>();
        s.q0 = o.at("q0").get<std::string>();
        s.s0 = o.at("s0").get<std::string>();
        s.x0 = o.at("x0").get<double>();
        s.mode = o.at("mode").get<std::string>();
        s.strategyFile = o.at("strategy_file").get<std::string>();
        s.kind = o.at("kind").get<std::string>();
        s.outDir = outDir;
        cmd_montecarlo(s);
    } else if (command == "merton") {
        MertonCmdOptions s;
        s.paramsFile = o.at("params").get<std::string>();
        s.execFile = o.at("exec").get<std::string>();
        s.gamma = o.at("gamma").get<double>();
        s.T = o.at("horizon").get<double>();
        s.steps = o.at("steps").get<int>();
        s.s0 = o.at("s0").get<std::string>();
        s.outDir = outDir;
        cmd_merton(s);
    } else {
        throw validation_error("manifest has unknown command: " + command);
    }
}

}  // namespace mou

#include "mou/strategy.hpp"

#include <cmath>

#include "mou/matrix_kit.hpp"

namespace mou {

StrategyKind strategy_kind_from_string(const std::string& s) {
    if (s == "OptimalOU") return StrategyKind::OptimalOU;
    if (s == "AlmgrenChriss") return StrategyKind::AlmgrenChriss;
    if (s == "Merton") return StrategyKind::Merton;
    if (s == "TWAP") return StrategyKind::TWAP;
    if (s == "Scaled") return StrategyKind::Scaled;
    throw validation_error("unknown strategy kind: " + s);
}

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::OptimalOU: return "OptimalOU";
        case StrategyKind::AlmgrenChriss: return "AlmgrenChriss";
        case StrategyKind::Merton: return "Merton";
        case StrategyKind::TWAP: return "TWAP";
        case StrategyKind::Scaled: return "Scaled";
    }
    return "?";
}

TradingMode trading_mode_from_string(const std::string& s) {
    if (s == "Liquidation" || s == "liquidation") return TradingMode::Liquidation;
    if (s == "StatArb" || s == "statarb") return TradingMode::StatArb;
    throw validation_error("unknown trading mode: " + s);
}

std::string to_string(TradingMode m) {
    return m == TradingMode::Liquidation ? "Liquidation" : "StatArb";
}

ExecutionSpec StrategyConfig::apply_mode(const ExecutionSpec& exec) const {
    if (mode == TradingMode::Liquidation) return exec;
    // StatArb: no terminal penalty. GammaTilde = K/2 makes the effective
    // penalty Gamma = GammaTilde - K/2 vanish.
    ExecutionSpec out = exec;
    out.GammaTilde = 0.5 * exec.K;
    return out;
}

Eigen::VectorXd StrategyConfig::apply_mode_q0(const Eigen::VectorXd& q0) const {
    if (mode == TradingMode::Liquidation) return q0;
    return Eigen::VectorXd::Zero(q0.size());
}

Eigen::VectorXd feedback_rate(const RiccatiSolution& sol, double t, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& S, const ExecutionSpec& exec) {
    const ODEState s = sol.at(t);
    const Eigen::VectorXd p = 2.0 * (s.A * q) + s.B * S + s.D;
    return 0.5 * exec.eta.llt().solve(p);
}

std::pair<double, Eigen::VectorXd> hamiltonian(const Eigen::VectorXd& p,
                                               const ExecutionSpec& exec) {
    const Eigen::VectorXd etaInvP = exec.eta.llt().solve(p);
    return {0.25 * p.dot(etaInvP), 0.5 * etaInvP};
}

Eigen::VectorXd ac_rate(const BrownianClosedForm& cf, const ExecutionSpec& exec, double t,
                        const Eigen::VectorXd& q) {
    return exec.eta.llt().solve(cf.A(t) * q);
}

Eigen::VectorXd ac_rate(const OUParams& ou, const ExecutionSpec& exec, double t,
                        const Eigen::VectorXd& q) {
    return ac_rate(BrownianClosedForm(ou, exec), exec, t, q);
}

namespace {

void require_well_conditioned_eta(const Eigen::MatrixXd& eta) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(eta), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12)
        throw validation_error("build_strategy: eta is ill-conditioned (condition number > 1e12)");
}

Control make_optimal_ou(const StrategyConfig& config, const StrategyInputs& inputs) {
    if (!inputs.solution)
        throw validation_error("build_strategy: OptimalOU requires a Riccati solution");
    const auto sol = inputs.solution;
    const ExecutionSpec exec = config.apply_mode(inputs.exec);

    // The solution must have been solved under the mode-effective penalty.
    const Eigen::MatrixXd wantA = -symmetrize(exec.Gamma());
    const Eigen::MatrixXd& haveA = sol->states.back().A;
    const double scale = std::max(1.0, wantA.cwiseAbs().maxCoeff());
    if ((haveA - wantA).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw validation_error(
            "build_strategy: Riccati solution terminal condition does not match the "
            "mode-effective terminal penalty");

    const Eigen::MatrixXd etaInv =
        exec.eta.llt().solve(Eigen::MatrixXd::Identity(exec.d(), exec.d()));
    if (sol->d() == 1) {
        // Scalar fast path: no temporaries on the hot Monte Carlo loop.
        const double ei = etaInv(0, 0);
        return [sol, ei](double t, const Eigen::VectorXd& q, const Eigen::VectorXd& S,
                         Eigen::VectorXd& v) {
            const ODEState s = sol->at(t);
            v[0] = 0.5 * ei * (2.0 * s.A(0, 0) * q[0] + s.B(0, 0) * S[0] + s.D[0]);
        };
    }
    return [sol, etaInv](double t, const Eigen::VectorXd& q, const Eigen::VectorXd& S,
                         Eigen::VectorXd& v) {
        const ODEState s = sol->at(t);
        v.noalias() = 0.5 * etaInv * (2.0 * (s.A * q) + s.B * S + s.D);
    };
}

Control make_almgren_chriss(const StrategyConfig& config, const StrategyInputs& inputs) {
    if (!inputs.brownian)
        throw validation_error("build_strategy: AlmgrenChriss requires the R = 0 closed form");
    const auto cf = inputs.brownian;
    const ExecutionSpec exec = config.apply_mode(inputs.exec);
    const Eigen::MatrixXd etaInv =
        exec.eta.llt().solve(Eigen::MatrixXd::Identity(exec.d(), exec.d()));
    return [cf, etaInv](double t, const Eigen::VectorXd& q, const Eigen::VectorXd&,
                        Eigen::VectorXd& v) { v.noalias() = etaInv * (cf->A(t) * q); };
}

Control make_merton(const StrategyConfig& config, const StrategyInputs& inputs) {
    if (!inputs.merton)
        throw validation_error("build_strategy: Merton requires a MertonSolution");
    if (!(inputs.trackingDt > 0.0))
        throw validation_error("build_strategy: Merton requires a positive tracking step");
    const auto merton = inputs.merton;
    const double dt = inputs.trackingDt;
    double cap = config.maxRate;
    if (!std::isfinite(cap) || cap <= 0.0) {
        // Default cap 10 |q0| / T; an all-zero q0 leaves the rate uncapped.
        const double q0norm = inputs.q0.size() > 0 ? inputs.q0.norm() : 0.0;
        cap = q0norm > 0.0 ? 10.0 * q0norm / merton->horizon()
                           : std::numeric_limits<double>::infinity();
    }
    return [merton, dt, cap](double t, const Eigen::VectorXd& q, const Eigen::VectorXd& S,
                             Eigen::VectorXd& v) {
        v = (merton->position(t, S) - q) / dt;
        const double n = v.norm();
        if (n > cap) v *= cap / n;
    };
}

Control make_twap(const StrategyConfig& config, const StrategyInputs& inputs) {
    if (inputs.q0.size() == 0) throw validation_error("build_strategy: TWAP requires q0");
    const Eigen::VectorXd rate = -config.apply_mode_q0(inputs.q0) / inputs.exec.T;
    return [rate](double, const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::VectorXd& v) {
        v = rate;
    };
}

}  // namespace

Control build_strategy(const StrategyConfig& config, const StrategyInputs& inputs) {
    require_well_conditioned_eta(inputs.exec.eta);

    switch (config.kind) {
        case StrategyKind::OptimalOU: return make_optimal_ou(config, inputs);
        case StrategyKind::AlmgrenChriss: return make_almgren_chriss(config, inputs);
        case StrategyKind::Merton: return make_merton(config, inputs);
        case StrategyKind::TWAP: return make_twap(config, inputs);
        case StrategyKind::Scaled: {
            StrategyConfig baseCfg = config;
            baseCfg.kind = config.base;
            if (config.base == StrategyKind::Scaled)
                throw validation_error("build_strategy: Scaled cannot wrap Scaled");
            Control base = build_strategy(baseCfg, inputs);
            const double f = config.scaleFactor;
            return [base, f](double t, const Eigen::VectorXd& q, const Eigen::VectorXd& S,
                             Eigen::VectorXd& v) {
                base(t, q, S, v);
                v *= f;
            };
        }
    }
    throw validation_error("build_strategy: unknown kind");
}

}  // namespace mou

#ifndef MOU_STRATEGY_HPP
#define MOU_STRATEGY_HPP

/**
 * @file strategy.hpp
 * @brief Executable controls: the optimal OU feedback law, the Almgren-Chriss
 *        (R = 0) closed-form strategy, the Merton position target, TWAP and
 *        scaled variants, plus liquidation / stat-arb configuration presets.
 *
 * Strategy closures capture immutable solution objects only and are safe for
 * concurrent rollouts.
 */

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <string>

#include "mou/closed_form.hpp"
#include "mou/model.hpp"
#include "mou/riccati.hpp"
#include "mou/simulation.hpp"

namespace mou {

enum class StrategyKind { OptimalOU, AlmgrenChriss, Merton, TWAP, Scaled };
enum class TradingMode { Liquidation, StatArb };

StrategyKind strategy_kind_from_string(const std::string& s);
std::string to_string(StrategyKind k);
TradingMode trading_mode_from_string(const std::string& s);
std::string to_string(TradingMode m);

/**
 * @brief Strategy selection and mode handling.
 *
 * StatArb mode forces a zero terminal penalty and zero initial inventory;
 * apply_mode / apply_mode_q0 implement that coercion and build_strategy
 * refuses a Riccati solution whose terminal condition disagrees with the
 * effective penalty.
 */
struct StrategyConfig {
    StrategyKind kind = StrategyKind::OptimalOU;
    TradingMode mode = TradingMode::Liquidation;
    StrategyKind base = StrategyKind::OptimalOU;  ///< wrapped kind for Scaled
    double scaleFactor = 1.0;                     ///< rate multiplier for Scaled
    double maxRate = std::numeric_limits<double>::infinity();  ///< Merton tracking cap

    ExecutionSpec apply_mode(const ExecutionSpec& exec) const;
    Eigen::VectorXd apply_mode_q0(const Eigen::VectorXd& q0) const;
};

/// Everything a strategy closure may need; only the fields required by the
/// chosen kind must be set.
struct StrategyInputs {
    std::shared_ptr<const RiccatiSolution> solution;     // OptimalOU
    std::shared_ptr<const BrownianClosedForm> brownian;  // AlmgrenChriss
    std::shared_ptr<const MertonSolution> merton;        // Merton
    ExecutionSpec exec;
    Eigen::VectorXd q0;       // TWAP and the default Merton rate cap
    double trackingDt = 0.0;  // Merton target-to-rate conversion step
};

/// Optimal feedback rate eta^{-1} (2 A(t) q + B(t) S + D(t)) / 2 with
/// linearly interpolated coefficients.
Eigen::VectorXd feedback_rate(const RiccatiSolution& sol, double t, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& S, const ExecutionSpec& exec);

/// Legendre-Fenchel transform of the quadratic cost: value p'eta^{-1}p / 4,
/// attained at v = eta^{-1} p / 2.
std::pair<double, Eigen::VectorXd> hamiltonian(const Eigen::VectorXd& p,
                                               const ExecutionSpec& exec);

/// Almgren-Chriss rate eta^{-1} A(t) q from the R = 0 closed form.
Eigen::VectorXd ac_rate(const BrownianClosedForm& cf, const ExecutionSpec& exec, double t,
                        const Eigen::VectorXd& q);
Eigen::VectorXd ac_rate(const OUParams& ou, const ExecutionSpec& exec, double t,
                        const Eigen::VectorXd& q);

/**
 * @brief Materialize a control closure for simulation::rollout.
 *
 * Throws validation_error when a required input is missing, when eta is
 * ill-conditioned (condition number > 1e12), or when the supplied Riccati
 * solution does not match the mode-effective terminal penalty.
 */
Control build_strategy(const StrategyConfig& config, const StrategyInputs& inputs);

}  // namespace mou

#endif  // MOU_STRATEGY_HPP

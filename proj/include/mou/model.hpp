#ifndef MOU_MODEL_HPP
#define MOU_MODEL_HPP

/**
 * @file model.hpp
 * @brief Domain types and parameter validation shared by every module.
 *
 * Unit conventions (fixed across the whole library):
 *   - time in days, horizon T in days
 *   - prices in currency units per share/contract
 *   - inventories in shares, trading rates in shares/day
 *   - eta in currency * day (cost per squared trading rate)
 *   - gamma in 1/currency (absolute risk aversion)
 *
 * All types are immutable value objects and safe to share between threads.
 */

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mou/errors.hpp"

namespace mou {

/// Relative floor used for positive semi-definiteness checks:
/// a symmetric matrix passes when min eigenvalue >= -kPsdRelTol * spectral radius.
inline constexpr double kPsdRelTol = 1e-10;

/**
 * @brief Mean-reverting price dynamics dS = R (Sbar - S) dt + V dW,
 *        with Sigma = V V^T the covariation matrix.
 *
 * Sigma must be symmetric PSD; operations that invert it (Merton limit,
 * upper envelope checks) additionally require strict positive definiteness.
 */
struct OUParams {
    Eigen::Index d = 0;     ///< number of assets
    Eigen::MatrixXd R;      ///< reversion generator, 1/day (not necessarily symmetric)
    Eigen::VectorXd Sbar;   ///< long-run mean, currency
    Eigen::MatrixXd Sigma;  ///< covariation, currency^2/day

    OUParams() = default;
    OUParams(Eigen::MatrixXd R_, Eigen::VectorXd Sbar_, Eigen::MatrixXd Sigma_);

    /// Driftless special case (R = 0, Sbar = 0) used by the Bachelier comparison.
    static OUParams brownian(const Eigen::MatrixXd& sigma);
};

/**
 * @brief Execution costs and objective parameters.
 *
 * The effective terminal penalty is Gamma = GammaTilde - K/2; it must be
 * symmetric PSD or construction through validated() fails.
 */
struct ExecutionSpec {
    Eigen::MatrixXd eta;         ///< temporary impact / execution cost, SPD
    Eigen::MatrixXd K;           ///< permanent impact, symmetric (defaults to zero)
    Eigen::MatrixXd GammaTilde;  ///< penalty on market-price MtM of leftover inventory
    double gamma = 0.0;          ///< absolute risk aversion, 1/currency
    double T = 0.0;              ///< trading horizon, days

    ExecutionSpec() = default;
    ExecutionSpec(Eigen::MatrixXd eta_, Eigen::MatrixXd GammaTilde_, double gamma_, double T_);
    ExecutionSpec(Eigen::MatrixXd eta_, Eigen::MatrixXd K_, Eigen::MatrixXd GammaTilde_,
                  double gamma_, double T_);

    Eigen::Index d() const { return eta.rows(); }

    /// Effective penalty on fundamental-price accounting.
    Eigen::MatrixXd Gamma() const { return GammaTilde - 0.5 * K; }
};

/// Uniform grid t_k = k T / N, k = 0..N.
struct TimeGrid {
    double T = 0.0;
    int N = 0;
    std::vector<double> times;

    TimeGrid() = default;
    TimeGrid(double T_, int N_);

    double dt() const { return T / N; }
};

/// Timestamped d-dimensional price series (historical or simulated).
struct MarketPath {
    Eigen::VectorXd times;   ///< strictly increasing instants, days
    Eigen::MatrixXd prices;  ///< one row per instant, one column per asset

    Eigen::Index d() const { return prices.cols(); }
    Eigen::Index n() const { return prices.rows(); }

    /// Throws validation_error on a malformed path.
    void validate() const;
};

/// Snapshot of a rollout: inventory, fundamental and market prices, cash.
struct ExecutionState {
    double t = 0.0;
    Eigen::VectorXd q;       ///< shares
    Eigen::VectorXd S;       ///< fundamental price
    Eigen::VectorXd Stilde;  ///< market price (differs from S only when K != 0)
    double X = 0.0;          ///< cash

    ExecutionState() = default;
    ExecutionState(double t_, Eigen::VectorXd q_, Eigen::VectorXd S_);
    ExecutionState(double t_, Eigen::VectorXd q_, Eigen::VectorXd S_, Eigen::VectorXd Stilde_,
                   double X_);
};

/**
 * @brief Diagnostic check of every standing assumption on (ou, exec).
 * @return one message per violated invariant; empty means valid.
 */
std::vector<std::string> validate_spec(const OUParams& ou, const ExecutionSpec& exec);

/// Throws validation_error listing all violations; no-op when valid.
void require_valid(const OUParams& ou, const ExecutionSpec& exec);

/**
 * @brief Terminal wealth of an execution state.
 *
 * Market-price accounting:      X + q'Stilde - q'GammaTilde q
 * Fundamental-price accounting: X + q'S - q'Gamma q
 *
 * The caller passes the cash process matching the chosen accounting; on any
 * rollout the two accountings differ by the constant -q0'K q0 / 2.
 */
double terminal_wealth(const ExecutionState& state, const ExecutionSpec& exec,
                       bool use_market_price);

}  // namespace mou

#endif  // MOU_MODEL_HPP

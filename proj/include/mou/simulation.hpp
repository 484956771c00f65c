#ifndef MOU_SIMULATION_HPP
#define MOU_SIMULATION_HPP

/**
 * @file simulation.hpp
 * @brief Exact-discretization OU path generation, execution rollouts and
 *        Monte Carlo PnL studies.
 *
 * Reproducibility contract: every Monte Carlo path draws from its own RNG
 * stream derived from (masterSeed, pathIndex), so results are bit-identical
 * for a fixed (seed, nPaths, grid) regardless of the worker count.
 */

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mou/model.hpp"

namespace mou {

/// Deterministic Gaussian stream: mt19937_64 keyed by (master, stream) with
/// an explicit Box-Muller transform (no library-dependent distribution state).
class GaussianStream {
  public:
    GaussianStream(std::uint64_t master, std::uint64_t stream);

    double next();
    void fill(Eigen::VectorXd& out);

  private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool haveSpare_ = false;
};

/// Cached one-step transition kernel: S' = Sbar + decay (S - Sbar) + L z.
class OUTransition {
  public:
    OUTransition(const OUParams& ou, double dt);

    Eigen::VectorXd step(const Eigen::VectorXd& S, const Eigen::VectorXd& noise) const;
    void step_inplace(Eigen::VectorXd& S, const Eigen::VectorXd& noise) const;

    const Eigen::MatrixXd& decay() const { return decay_; }
    const Eigen::MatrixXd& noise_factor() const { return noiseFactor_; }

  private:
    Eigen::VectorXd Sbar_;
    Eigen::MatrixXd decay_;        // e^{-R dt}
    Eigen::MatrixXd noiseFactor_;  // L with L L' = integrated covariance over dt
};

/**
 * @brief One exact OU transition over dt driven by a standard normal vector.
 *
 * Equals Sbar + e^{-R dt}(S - Sbar) + L noise with L a factor of the
 * integrated covariance. Cholesky is tried first; an eigenvalue square root
 * is the fallback, and eigenvalues below the PSD floor raise numerical_error.
 */
Eigen::VectorXd ou_step_exact(const OUParams& ou, const Eigen::VectorXd& S, double dt,
                              const Eigen::VectorXd& noise);

/// Trading-rate control: writes v(t, q, S) into v_out. Implementations must be
/// pure (safe to call concurrently from several rollouts).
using Control =
    std::function<void(double t, const Eigen::VectorXd& q, const Eigen::VectorXd& S,
                       Eigen::VectorXd& v_out)>;

/// Per-step record of a strategy rollout.
struct ExecutionTrace {
    TimeGrid grid;
    Eigen::MatrixXd q;       ///< (N+1) x d shares
    Eigen::MatrixXd v;       ///< N x d shares/day
    Eigen::MatrixXd S;       ///< (N+1) x d fundamental price
    Eigen::MatrixXd Stilde;  ///< (N+1) x d market price
    Eigen::VectorXd X;       ///< (N+1) market cash
    Eigen::VectorXd Xfund;   ///< (N+1) fundamental cash (equals X when K = 0)
    Eigen::VectorXd pnl;     ///< X_k + q_k'Stilde_k - X_0 - q_0'Stilde_0
};

/**
 * @brief Roll a control along a supplied price path.
 *
 * The path must be uniformly sampled; times are re-based so the rollout clock
 * starts at 0. Inventory updates exactly as q_{k+1} = q_k + v_k dt; cash is
 * charged at the average of pre- and post-step prices plus the quadratic
 * execution cost, which makes the market/fundamental accounting identity hold
 * pathwise to machine precision.
 */
ExecutionTrace rollout(const Control& control, const OUParams& ou, const ExecutionSpec& exec,
                       const ExecutionState& initial, const MarketPath& path);

/// Roll a control on a freshly simulated OU path over the given grid.
ExecutionTrace rollout_simulated(const Control& control, const OUParams& ou,
                                 const ExecutionSpec& exec, const ExecutionState& initial,
                                 const TimeGrid& grid, std::uint64_t seed,
                                 std::uint64_t stream = 0);

/// Terminal results of one Monte Carlo path.
struct PathOutcome {
    double pnl = 0.0;     ///< mark-to-market PnL at T
    double wealth = 0.0;  ///< penalty-adjusted terminal wealth (market accounting)
};

struct PnLSummary {
    int nPaths = 0;
    double mean = 0.0;
    double stdev = 0.0;
    double skewness = 0.0;
    Eigen::VectorXd binEdges;  ///< 61 edges for 60 bins spanning mean +- 4 stdev
    Eigen::VectorXi counts;    ///< counts sum to nPaths (outliers clamp to edge bins)
    std::uint64_t seed = 0;
};

struct MonteCarloConfig {
    int nPaths = 1500;
    std::uint64_t seed = 1;
    int nThreads = 0;  ///< 0 = hardware concurrency
    int histogramBins = 60;
};

/// Per-path terminal outcomes, ordered by path index (deterministic).
std::vector<PathOutcome> monte_carlo_outcomes(const Control& control, const OUParams& ou,
                                              const ExecutionSpec& exec,
                                              const ExecutionState& initial, const TimeGrid& grid,
                                              const MonteCarloConfig& cfg);

/// Summary statistics and histogram of the terminal PnL distribution.
PnLSummary monte_carlo_pnl(const Control& control, const OUParams& ou, const ExecutionSpec& exec,
                           const ExecutionState& initial, const TimeGrid& grid,
                           const MonteCarloConfig& cfg);

}  // namespace mou

#endif  // MOU_SIMULATION_HPP

#ifndef MOU_ESTIMATION_HPP
#define MOU_ESTIMATION_HPP

/**
 * @file estimation.hpp
 * @brief Parameter estimation from discrete price observations.
 *
 * A sampled OU process is a VAR(1): S_{k+1} = a + Phi S_k + eps_k. We fit it
 * by ordinary least squares and convert to continuous time via the matrix
 * logarithm (R = -log(Phi)/dt, Sbar = (I-Phi)^{-1} a, Sigma = Qres/dt; the
 * last is first-order in dt, adequate at intraday sampling).
 *
 * The Johansen trace test (constant term, lag 1) estimates the cointegration
 * rank; 95% critical values are embedded for up to 5 common trends.
 */

#include <Eigen/Dense>

#include "mou/model.hpp"

namespace mou {

struct VAR1Fit {
    Eigen::MatrixXd Phi;   ///< lag-1 coefficient
    Eigen::VectorXd a;     ///< intercept
    Eigen::MatrixXd Qres;  ///< residual covariance (denominator nObs - d - 1)
    double dt = 0.0;       ///< sampling interval, days
    int nObs = 0;          ///< number of regression equations (transitions)
    Eigen::VectorXd r2;    ///< per-equation R^2 diagnostics
};

struct JohansenResult {
    Eigen::VectorXd traceStats;        ///< statistic for null r <= k, k = 0..d-1
    Eigen::VectorXd criticalValues95;  ///< matching 95% critical values
    Eigen::VectorXd eigenvalues;       ///< canonical correlations, descending
    int selectedRank = 0;              ///< first k whose null is not rejected
    Eigen::MatrixXd cointVectors;      ///< d x selectedRank leading vectors
};

/**
 * @brief OLS fit of S_{k+1} on (1, S_k).
 *
 * Requires uniform sampling (max deviation of dt <= 1% of the median) and at
 * least d + 2 transitions. Throws validation_error for non-uniform sampling
 * and numerical_error naming the collinear columns when the regressors are
 * rank deficient.
 */
VAR1Fit fit_var1(const MarketPath& path);

/**
 * @brief Continuous-time parameters from a VAR(1) fit.
 *
 * Throws numerical_error "matrix logarithm undefined" when an eigenvalue of
 * Phi has non-positive real part, and "no stationary mean (unit root)" when
 * I - Phi is singular. Imaginary residue of the log above 1e-8 is an error;
 * below, it is truncated.
 */
OUParams var1_to_ou(const VAR1Fit& fit);

/// Bachelier (driftless) covariance: sample covariance of increments / dt.
Eigen::MatrixXd fit_bachelier(const MarketPath& path);

/**
 * @brief Johansen trace test for the cointegration rank at 95% significance.
 *
 * VECM with constant and a single lag. Supports d <= 5 (tabulated critical
 * values); requires at least 10 d observations. The selected rank is the
 * first null hypothesis r <= k that is not rejected.
 */
JohansenResult johansen_trace(const MarketPath& path);

}  // namespace mou

#endif  // MOU_ESTIMATION_HPP

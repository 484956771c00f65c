#ifndef MOU_MATRIX_KIT_HPP
#define MOU_MATRIX_KIT_HPP

/**
 * @file matrix_kit.hpp
 * @brief Small dense-matrix kernels: matrix exponential, integrated OU
 *        covariance, symmetric eigen-checks and the PSD order.
 *
 * Pure functions; reentrant; thread-safe. Target regime is d <= ~10.
 */

#include <Eigen/Dense>

#include "mou/model.hpp"

namespace mou {

/// Integral of e^{-R u} Sigma e^{-R' u} over u in [0, tau].
struct CovIntegral {
    double horizon = 0.0;   ///< tau, days
    Eigen::MatrixXd value;  ///< symmetric PSD, currency^2
};

/// (M + M') / 2
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

/// Largest |eigenvalue| of a symmetric matrix.
double spectral_radius(const Eigen::MatrixXd& sym);

/// min eigenvalue >= -relTol * spectral radius
bool is_psd(const Eigen::MatrixXd& sym, double relTol = kPsdRelTol);

/**
 * @brief e^M by scaling-and-squaring with a degree-13 Pade approximant.
 *
 * Accurate to ~1e-12 relative for ||M|| <= 100. Throws numerical_error if the
 * input is non-finite or the result overflows (never returns silent infinities).
 */
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& M);

/**
 * @brief Sigma_tau = integral of e^{-R u} Sigma e^{-R' u} du over [0, tau].
 *
 * Composite Simpson quadrature on max(64, ceil(256 tau ||R||_1)) panels, then
 * symmetrized. Works for any (possibly defective) R.
 */
CovIntegral integrated_covariance(const OUParams& ou, double tau);

/// Same integral expressed directly on matrices.
Eigen::MatrixXd integrated_covariance(const Eigen::MatrixXd& R, const Eigen::MatrixXd& Sigma,
                                      double tau);

/// Mlow <= Mhigh in the PSD order, up to tolerance: min eig(Mhigh - Mlow) >= -tol.
bool psd_leq(const Eigen::MatrixXd& Mlow, const Eigen::MatrixXd& Mhigh, double tol);

/// Symmetric PSD square root via eigendecomposition. Small negative
/// eigenvalues (within the PSD floor) are clamped to zero.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& M);

/// Inverse square root of an SPD matrix; throws numerical_error when singular.
Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& M);

}  // namespace mou

#endif  // MOU_MATRIX_KIT_HPP

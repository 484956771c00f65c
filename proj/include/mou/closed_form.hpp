#ifndef MOU_CLOSED_FORM_HPP
#define MOU_CLOSED_FORM_HPP

/**
 * @file closed_form.hpp
 * @brief Analytic solutions for the two tractable limits.
 *
 * Brownian case (R = 0): the inventory coefficient A(t) solves
 * A' = gamma/2 Sigma - A eta^{-1} A with A(T) = -Gamma and admits a closed
 * form through the change of variables a = eta^{-1/2} A eta^{-1/2}.
 *
 * Merton limit (no execution costs, no terminal penalty): theta reduces to
 * S'Chat(t)S + Ehat(t)'S + Fhat(t) with explicit linear-in-(T-t) coefficients,
 * and the optimal position is affine in S.
 *
 * Both serve as standalone strategies and as oracles for the ODE solver.
 * Pure functions; thread-safe.
 */

#include <Eigen/Dense>

#include "mou/model.hpp"

namespace mou {

/// Precomputed factors for the R = 0 closed form.
class BrownianClosedForm {
  public:
    /// Requires R = 0 and Sigma positive definite; throws otherwise.
    BrownianClosedForm(const OUParams& ou, const ExecutionSpec& exec);

    /// xi(t), the negative-definite linear-flow matrix whose inverse shifts Ahat.
    Eigen::MatrixXd xi(double t) const;

    /// A(t) = eta^{1/2} (Ahat + xi(t)^{-1}) eta^{1/2}; A(T) = -Gamma.
    Eigen::MatrixXd A(double t) const;

    const Eigen::MatrixXd& Ahat() const { return Ahat_; }
    const Eigen::MatrixXd& Cmat() const { return Cmat_; }
    const Eigen::MatrixXd& etaHalf() const { return etaHalf_; }
    double horizon() const { return T_; }

  private:
    Eigen::MatrixXd expAhat(double tau) const;  // e^{-Ahat tau} via the cached eigenbasis

    double T_ = 0.0;
    Eigen::MatrixXd Ahat_;        // sqrt(gamma/2) (eta^{-1/2} Sigma eta^{-1/2})^{1/2}, SPD
    Eigen::MatrixXd Cmat_;        // eta^{-1/2} Gamma eta^{-1/2}, PSD
    Eigen::MatrixXd etaHalf_;     // eta^{1/2}
    Eigen::MatrixXd etaHalfInv_;  // eta^{-1/2}
    Eigen::MatrixXd CpAinv_;      // (Cmat + Ahat)^{-1}
    Eigen::VectorXd eigs_;        // eigenvalues of Ahat
    Eigen::MatrixXd vecs_;        // eigenvectors of Ahat
};

/// A(t) of the R = 0 problem. Throws validation_error when R != 0,
/// numerical_error when Sigma is singular.
Eigen::MatrixXd brownian_A(const OUParams& ou, const ExecutionSpec& exec, double t);

/// xi(t) of the R = 0 problem (same preconditions).
Eigen::MatrixXd riccati_flow_xi(const OUParams& ou, const ExecutionSpec& exec, double t);

/// Coefficients of the frictionless-limit value: all vanish at t = T.
class MertonSolution {
  public:
    /// Requires Sigma positive definite.
    MertonSolution(const OUParams& ou, double gamma, double T);

    Eigen::MatrixXd Chat(double t) const;  // (T-t)/(2 gamma) R' Sigma^{-1} R
    Eigen::VectorXd Ehat(double t) const;  // -(T-t)/gamma R' Sigma^{-1} R Sbar
    double Fhat(double t) const;

    double theta(double t, const Eigen::VectorXd& S) const;
    Eigen::VectorXd position(double t, const Eigen::VectorXd& S) const;

    double horizon() const { return T_; }

  private:
    double gamma_ = 0.0;
    double T_ = 0.0;
    Eigen::MatrixXd R_;
    Eigen::VectorXd Sbar_;
    Eigen::MatrixXd RtSiR_;    // R' Sigma^{-1} R
    double trRtSiRSigma_ = 0;  // Tr(R' Sigma^{-1} R Sigma)
    double sbarQuad_ = 0;      // Sbar' R' Sigma^{-1} R Sbar
    Eigen::MatrixXd SigInvR_;  // Sigma^{-1} R
};

/// thetahat(t, S) of the frictionless limit; zero at t = T and identically
/// zero when R = 0.
double merton_theta(const OUParams& ou, double gamma, double T, double t,
                    const Eigen::VectorXd& S);

/// Optimal frictionless position (I + (T-t) R') Sigma^{-1} R (Sbar - S) / gamma.
Eigen::VectorXd merton_position(const OUParams& ou, double gamma, double T, double t,
                                const Eigen::VectorXd& S);

}  // namespace mou

#endif  // MOU_CLOSED_FORM_HPP

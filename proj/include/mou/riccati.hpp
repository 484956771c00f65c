#ifndef MOU_RICCATI_HPP
#define MOU_RICCATI_HPP

/**
 * @file riccati.hpp
 * @brief Backward solver for the quadratic-ansatz coefficient system.
 *
 * The certainty-equivalent value of the execution problem is
 *   theta(t,q,S) = q'A(t)q + q'B(t)S + S'C(t)S + D(t)'q + E(t)'S + F(t),
 * where (A..F) satisfy a coupled backward ODE system whose (A,B,C) part is a
 * matrix Riccati equation in the 2d x 2d block matrix
 *   P = [ A    B/2 ]
 *       [ B'/2  C  ],     P' = Q + Y'P + PY + PUP,
 * with terminal condition A(T) = -Gamma and B,C,D,E,F zero at T.
 *
 * solve_backward is a backward implicit Euler sweep. Each step's nonlinear
 * equation is solved by damped fixed-point iteration with a Newton fallback;
 * steps failing either the inner solve or a step-doubling accuracy estimate
 * are halved locally (the terminal region is stiff when Gamma >> eta / dt).
 *
 * The solved P(t) is certified against two PSD-order envelopes: a hold-strategy
 * lower bound and a frictionless-limit upper bound (check_bounds).
 */

#include <Eigen/Dense>
#include <vector>

#include "mou/model.hpp"

namespace mou {

/// Coefficients of the quadratic ansatz at one instant. A and C symmetric.
struct ODEState {
    Eigen::MatrixXd A;  ///< currency / share^2
    Eigen::MatrixXd B;  ///< 1 / share
    Eigen::MatrixXd C;  ///< 1 / currency
    Eigen::VectorXd D;  ///< currency / share
    Eigen::VectorXd E;  ///< dimensionless
    double F = 0.0;     ///< currency

    static ODEState zero(Eigen::Index d);
};

/// 2d x 2d symmetric block assembly of (A, B, C).
struct PBlock {
    Eigen::MatrixXd P;
};

PBlock assemble_pblock(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const Eigen::MatrixXd& C);
void split_pblock(const PBlock& blk, Eigen::MatrixXd& A, Eigen::MatrixXd& B, Eigen::MatrixXd& C);

/// Outcome of the sandwich certification.
struct BoundsReport {
    bool ok = false;
    double margin = 0.0;  ///< most negative eigenvalue seen across both checks
    double tol = 0.0;     ///< absolute PSD slack used
};

/// Time-gridded solution; immutable after construction, safe to share.
struct RiccatiSolution {
    TimeGrid grid;
    std::vector<ODEState> states;  ///< index k <-> t_k, states[N] is the exact terminal state
    bool boundsOk = false;
    double boundsMargin = 0.0;
    double boundsTol = 0.0;

    Eigen::Index d() const { return states.empty() ? 0 : states.front().A.rows(); }

    /// Componentwise linear interpolation; throws std::out_of_range outside [0, T].
    ODEState at(double t) const;
};

/// Time-derivatives of the six coefficient blocks (A' and C' symmetrized).
ODEState ode_rhs(double t, const ODEState& s, const OUParams& ou, const ExecutionSpec& exec);

/// Q + Y'P + PY + PUP, symmetrized.
PBlock compact_rhs(const PBlock& P, const OUParams& ou, const ExecutionSpec& exec);

struct SolveOptions {
    double fixedPointTol = 1e-12;  ///< relative max-entry change per inner iteration
    int fixedPointMaxIter = 200;
    int newtonMaxIter = 50;
    int maxStepHalvings = 10;      ///< local substepping cap: up to 2^10 substeps
    double localErrorTol = 1e-8;   ///< step-doubling accuracy trigger, relative
    bool runBoundsCheck = true;
    double boundsTolScale = 1e-6;  ///< bounds tolerance = scale * spectral radius
};

/**
 * @brief Backward sweep from the terminal condition to t = 0.
 *
 * Preconditions: validate_spec passes; grid valid. Throws numerical_error when
 * an inner solve fails after exhausting substeps (naming the step and residual).
 * The bounds certificate is diagnostic: a violation beyond tolerance yields
 * boundsOk = false but still returns the solution.
 */
RiccatiSolution solve_backward(const OUParams& ou, const ExecutionSpec& exec, const TimeGrid& grid,
                               const SolveOptions& opts = {});

/**
 * @brief Certify lower(t) <= P(t) <= upper(t) in the PSD order at every node.
 *
 * lower(t) = [ -gamma/2 Sigma_{T-t} - Gamma,  -(I - e^{-R(T-t)})/2 ; ., 0 ],
 * upper(t) = [ 0, 0 ; 0, (T-t)/(2 gamma) R' Sigma^{-1} R ].
 *
 * Requires Sigma positive definite unless R = 0 (where the upper envelope is
 * the zero matrix); otherwise throws numerical_error
 * "upper bound requires invertible Sigma".
 */
BoundsReport check_bounds(const RiccatiSolution& sol, const OUParams& ou,
                          const ExecutionSpec& exec, double tol);

/// Quadratic-form value theta(t, q, S) with linearly interpolated coefficients.
double theta_eval(const RiccatiSolution& sol, double t, const Eigen::VectorXd& q,
                  const Eigen::VectorXd& S);

/**
 * @brief Indirect utility -exp(-gamma (x + q'S + theta(t,q,S))).
 *
 * Throws numerical_error when the exponent magnitude exceeds 700 (exp would
 * overflow/underflow past double range).
 */
double value_function(const RiccatiSolution& sol, double t, double x, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& S, const ExecutionSpec& exec);

}  // namespace mou

#endif  // MOU_RICCATI_HPP

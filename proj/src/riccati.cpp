#include "mou/riccati.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "mou/matrix_kit.hpp"

namespace mou {

ODEState ODEState::zero(Eigen::Index d) {
    ODEState s;
    s.A = Eigen::MatrixXd::Zero(d, d);
    s.B = Eigen::MatrixXd::Zero(d, d);
    s.C = Eigen::MatrixXd::Zero(d, d);
    s.D = Eigen::VectorXd::Zero(d);
    s.E = Eigen::VectorXd::Zero(d);
    s.F = 0.0;
    return s;
}

PBlock assemble_pblock(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const Eigen::MatrixXd& C) {
    const Eigen::Index d = A.rows();
    Eigen::MatrixXd P(2 * d, 2 * d);
    P.topLeftCorner(d, d) = A;
    P.topRightCorner(d, d) = 0.5 * B;
    P.bottomLeftCorner(d, d) = 0.5 * B.transpose();
    P.bottomRightCorner(d, d) = C;
    return PBlock{std::move(P)};
}

void split_pblock(const PBlock& blk, Eigen::MatrixXd& A, Eigen::MatrixXd& B, Eigen::MatrixXd& C) {
    const Eigen::Index d = blk.P.rows() / 2;
    A = blk.P.topLeftCorner(d, d);
    B = 2.0 * blk.P.topRightCorner(d, d);
    C = blk.P.bottomRightCorner(d, d);
}

ODEState ode_rhs(double /*t*/, const ODEState& s, const OUParams& ou, const ExecutionSpec& exec) {
    const Eigen::Index d = ou.d;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd etaInv = exec.eta.llt().solve(I);
    const double g = exec.gamma;

    const Eigen::MatrixXd BpI = s.B + I;

    ODEState out;
    out.A = symmetrize(0.5 * g * BpI * ou.Sigma * BpI.transpose() - s.A * etaInv * s.A);
    out.B = BpI * ou.R + 2.0 * g * BpI * ou.Sigma * s.C - s.A * etaInv * s.B;
    out.C = symmetrize(ou.R.transpose() * s.C + s.C * ou.R + 2.0 * g * s.C * ou.Sigma * s.C -
                       0.25 * s.B.transpose() * etaInv * s.B);
    out.D = -BpI * ou.R * ou.Sbar + g * BpI * ou.Sigma * s.E - s.A * etaInv * s.D;
    out.E = -2.0 * s.C * ou.R * ou.Sbar + ou.R.transpose() * s.E + 2.0 * g * s.C * ou.Sigma * s.E -
            0.5 * s.B.transpose() * etaInv * s.D;
    out.F = -ou.Sbar.dot(ou.R.transpose() * s.E) - (ou.Sigma * s.C).trace() +
            0.5 * g * s.E.dot(ou.Sigma * s.E) - 0.25 * s.D.dot(etaInv * s.D);
    return out;
}

namespace {

// Dense 2d x 2d ingredients of the compact quadratic form.
struct CompactForms {
    Eigen::MatrixXd Q, Y, U;

    CompactForms(const OUParams& ou, const ExecutionSpec& exec) {
        const Eigen::Index d = ou.d;
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
        const Eigen::MatrixXd etaInv = exec.eta.llt().solve(I);
        const double g = exec.gamma;

        Q = Eigen::MatrixXd::Zero(2 * d, 2 * d);
        Q.topLeftCorner(d, d) = 0.5 * g * ou.Sigma;
        Q.topRightCorner(d, d) = 0.5 * ou.R;
        Q.bottomLeftCorner(d, d) = 0.5 * ou.R.transpose();

        Y = Eigen::MatrixXd::Zero(2 * d, 2 * d);
        Y.bottomLeftCorner(d, d) = g * ou.Sigma;
        Y.bottomRightCorner(d, d) = ou.R;

        U = Eigen::MatrixXd::Zero(2 * d, 2 * d);
        U.topLeftCorner(d, d) = -etaInv;
        U.bottomRightCorner(d, d) = 2.0 * g * ou.Sigma;
    }

    Eigen::MatrixXd rhs(const Eigen::MatrixXd& P) const {
        Eigen::MatrixXd out = Q;
        out.noalias() += Y.transpose() * P;
        out.noalias() += P * Y;
        Eigen::MatrixXd PU = P * U;
        out.noalias() += PU * P;
        return symmetrize(out);
    }
};

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

double max_abs(const Eigen::MatrixXd& M) { return M.cwiseAbs().maxCoeff(); }

// The A, B, C blocks of P live on very different scales (their units differ),
// so convergence and accuracy tests are made per block, each relative to the
// block's own magnitude.
double block_rel_change(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& X,
                        const Eigen::MatrixXd& ref) {
    const Eigen::Index d = X.rows() / 2;
    const double global = std::max({max_abs(X), max_abs(ref), 1.0});
    auto rel = [&](Eigen::Index r, Eigen::Index c) {
        const double scale = std::max({max_abs(X.block(r, c, d, d)),
                                       max_abs(ref.block(r, c, d, d)), 1e-10 * global, 1e-300});
        return max_abs(delta.block(r, c, d, d)) / scale;
    };
    return std::max({rel(0, 0), rel(0, d), rel(d, d)});
}

// One implicit Euler step of the compact Riccati block: solve
//   P = Pnext - h * rhs(P)
// by damped fixed-point iteration, falling back to a vectorized Newton solve.
// The Newton iteration is seeded at Pnext: starting on the concave side keeps
// it on the solution branch that tends to Pnext as h -> 0 (the explicit
// predictor can overshoot past the spurious branch in stiff penalty layers).
class ImplicitStepper {
  public:
    ImplicitStepper(const OUParams& ou, const ExecutionSpec& exec, const SolveOptions& opts)
        : forms_(ou, exec), opts_(opts), n_(2 * ou.d) {}

    const CompactForms& forms() const { return forms_; }

    bool step(const Eigen::MatrixXd& Pnext, double h, Eigen::MatrixXd& out,
              double& residual) const {
        Eigen::MatrixXd X = Pnext - h * forms_.rhs(Pnext);  // explicit-Euler predictor
        if (fixed_point(Pnext, h, X, residual) && branch_ok(X)) {
            out = X;
            return true;
        }
        X = Pnext;
        if (newton(Pnext, h, X, residual) && branch_ok(X)) {
            out = X;
            return true;
        }
        return false;
    }

  private:
    // The inventory block of P stays negative semi-definite along the true
    // solution; a positive eigenvalue beyond rounding means the inner solve
    // landed on the spurious branch of the quadratic.
    bool branch_ok(const Eigen::MatrixXd& X) const {
        const Eigen::Index d = n_ / 2;
        const Eigen::MatrixXd A = symmetrize(X.topLeftCorner(d, d));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        const double hi = es.eigenvalues().maxCoeff();
        const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        return hi <= 1e-8 * scale;
    }

    bool fixed_point(const Eigen::MatrixXd& Pnext, double h, Eigen::MatrixXd& X,
                     double& residual) const {
        double omega = 1.0;
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < opts_.fixedPointMaxIter; ++it) {
            const Eigen::MatrixXd G = Pnext - h * forms_.rhs(X);
            const Eigen::MatrixXd delta = G - X;
            const double change = block_rel_change(delta, X, Pnext);
            if (change <= opts_.fixedPointTol) {
                residual = change;
                return true;
            }
            if (change > 1e6) return false;  // diverging, hand over to Newton
            if (change > prev) omega = std::max(omega * 0.5, 1.0 / 64.0);
            prev = change;
            X += omega * delta;
            residual = change;
        }
        return false;
    }

    bool newton(const Eigen::MatrixXd& Pnext, double h, Eigen::MatrixXd& X,
                double& residual) const {
        const Eigen::MatrixXd In2 = Eigen::MatrixXd::Identity(n_ * n_, n_ * n_);
        const Eigen::MatrixXd In = Eigen::MatrixXd::Identity(n_, n_);
        for (int it = 0; it < opts_.newtonMaxIter; ++it) {
            const Eigen::MatrixXd F = X - Pnext + h * forms_.rhs(X);
            residual = block_rel_change(F, X, Pnext);
            if (residual <= opts_.fixedPointTol) return true;

            // Directional derivative of rhs at X: Y'd + dY + dUX + XUd.
            const Eigen::MatrixXd PU = X * forms_.U;  // (UX)' = XU for symmetric X, U
            Eigen::MatrixXd J = In2;
            J += h * (kron(In, forms_.Y.transpose()) + kron(forms_.Y.transpose(), In) +
                      kron(PU, In) + kron(In, PU));
            Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(F.data(), n_ * n_);
            Eigen::VectorXd dx = J.partialPivLu().solve(-f);
            if (!dx.allFinite()) return false;
            X += Eigen::Map<Eigen::MatrixXd>(dx.data(), n_, n_);
            X = symmetrize(X);
        }
        return false;
    }

    CompactForms forms_;
    SolveOptions opts_;
    Eigen::Index n_;
};

// Backward sweep workspace for the linear (D, E) block and the F quadrature.
struct TailIntegrator {
    const OUParams& ou;
    const ExecutionSpec& exec;
    Eigen::MatrixXd etaInv;
    Eigen::MatrixXd I;

    TailIntegrator(const OUParams& ou_, const ExecutionSpec& exec_) : ou(ou_), exec(exec_) {
        I = Eigen::MatrixXd::Identity(ou.d, ou.d);
        etaInv = exec.eta.llt().solve(I);
    }

    // Implicit Euler for [D; E] with (A, B, C) frozen at the new node.
    void step_de(const ODEState& lo_abc, const Eigen::VectorXd& Dnext,
                 const Eigen::VectorXd& Enext, double h, Eigen::VectorXd& Dout,
                 Eigen::VectorXd& Eout) const {
        const Eigen::Index d = ou.d;
        const double g = exec.gamma;
        const Eigen::MatrixXd BpI = lo_abc.B + I;

        Eigen::MatrixXd M(2 * d, 2 * d);
        M.topLeftCorner(d, d) = -lo_abc.A * etaInv;
        M.topRightCorner(d, d) = g * BpI * ou.Sigma;
        M.bottomLeftCorner(d, d) = -0.5 * lo_abc.B.transpose() * etaInv;
        M.bottomRightCorner(d, d) = ou.R.transpose() + 2.0 * g * lo_abc.C * ou.Sigma;

        Eigen::VectorXd b(2 * d);
        b.head(d) = -BpI * ou.R * ou.Sbar;
        b.tail(d) = -2.0 * lo_abc.C * ou.R * ou.Sbar;

        Eigen::VectorXd rhs(2 * d);
        rhs.head(d) = Dnext;
        rhs.tail(d) = Enext;
        rhs -= h * b;

        const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(2 * d, 2 * d) + h * M;
        Eigen::VectorXd z = lhs.partialPivLu().solve(rhs);
        Dout = z.head(d);
        Eout = z.tail(d);
    }

    double f_rate(const ODEState& s) const {
        return -ou.Sbar.dot(ou.R.transpose() * s.E) - (ou.Sigma * s.C).trace() +
               0.5 * exec.gamma * s.E.dot(ou.Sigma * s.E) - 0.25 * s.D.dot(etaInv * s.D);
    }
};

double state_max_abs(const ODEState& s) {
    double m = std::abs(s.F);
    m = std::max(m, max_abs(s.A));
    m = std::max(m, max_abs(s.B));
    m = std::max(m, max_abs(s.C));
    m = std::max(m, s.D.cwiseAbs().maxCoeff());
    m = std::max(m, s.E.cwiseAbs().maxCoeff());
    return m;
}

// Worst per-block relative discrepancy between two candidate states.
double state_rel_diff(const ODEState& a, const ODEState& b) {
    const double global = std::max({state_max_abs(a), state_max_abs(b), 1.0});
    auto rel = [&](double diff, double sa, double sb) {
        return diff / std::max({sa, sb, 1e-10 * global, 1e-300});
    };
    double m = rel(std::abs(a.F - b.F), std::abs(a.F), std::abs(b.F));
    m = std::max(m, rel(max_abs(a.A - b.A), max_abs(a.A), max_abs(b.A)));
    m = std::max(m, rel(max_abs(a.B - b.B), max_abs(a.B), max_abs(b.B)));
    m = std::max(m, rel(max_abs(a.C - b.C), max_abs(a.C), max_abs(b.C)));
    m = std::max(m, rel((a.D - b.D).cwiseAbs().maxCoeff(), a.D.cwiseAbs().maxCoeff(),
                        b.D.cwiseAbs().maxCoeff()));
    m = std::max(m, rel((a.E - b.E).cwiseAbs().maxCoeff(), a.E.cwiseAbs().maxCoeff(),
                        b.E.cwiseAbs().maxCoeff()));
    return m;
}

}  // namespace

PBlock compact_rhs(const PBlock& P, const OUParams& ou, const ExecutionSpec& exec) {
    CompactForms forms(ou, exec);
    return PBlock{forms.rhs(P.P)};
}

namespace {

// Integrate one grid interval of width h backward with nsub implicit substeps.
std::optional<ODEState> integrate_interval(const ODEState& next, double h, int nsub,
                                           const ImplicitStepper& stepper,
                                           const TailIntegrator& tail, double& residual) {
    const double hs = h / nsub;
    ODEState cur = next;
    for (int j = 0; j < nsub; ++j) {
        PBlock blk = assemble_pblock(cur.A, cur.B, cur.C);
        Eigen::MatrixXd Plo;
        if (!stepper.step(blk.P, hs, Plo, residual)) return std::nullopt;

        ODEState lo;
        split_pblock(PBlock{Plo}, lo.A, lo.B, lo.C);
        lo.A = symmetrize(lo.A);
        lo.C = symmetrize(lo.C);
        tail.step_de(lo, cur.D, cur.E, hs, lo.D, lo.E);
        lo.F = cur.F - 0.5 * hs * (tail.f_rate(lo) + tail.f_rate(cur));
        cur = std::move(lo);
    }
    return cur;
}

}  // namespace

RiccatiSolution solve_backward(const OUParams& ou, const ExecutionSpec& exec, const TimeGrid& grid,
                               const SolveOptions& opts) {
    require_valid(ou, exec);
    if (std::abs(grid.T - exec.T) > 1e-9 * std::max(1.0, exec.T))
        throw validation_error("solve_backward: grid horizon does not match exec.T");

    const Eigen::Index d = ou.d;
    const double dt = grid.dt();
    const ImplicitStepper stepper(ou, exec, opts);
    const TailIntegrator tail(ou, exec);

    RiccatiSolution sol;
    sol.grid = grid;
    sol.states.resize(static_cast<std::size_t>(grid.N) + 1);

    ODEState terminal = ODEState::zero(d);
    terminal.A = -symmetrize(exec.Gamma());
    sol.states[static_cast<std::size_t>(grid.N)] = terminal;

    const int maxSub = 1 << opts.maxStepHalvings;
    int warmStart = 1;  // carry the substep count between grid steps
    for (int k = grid.N - 1; k >= 0; --k) {
        const ODEState& next = sol.states[static_cast<std::size_t>(k) + 1];
        double residual = 0.0;
        std::optional<ODEState> prev;
        std::optional<ODEState> accepted;
        int acceptedSub = warmStart;
        for (int nsub = warmStart; nsub <= maxSub; nsub *= 2) {
            auto cur = integrate_interval(next, dt, nsub, stepper, tail, residual);
            if (cur && prev) {
                if (state_rel_diff(*cur, *prev) <= opts.localErrorTol) {
                    accepted = std::move(cur);
                    acceptedSub = nsub;
                    break;
                }
            }
            if (nsub == maxSub && cur) {  // substep budget exhausted
                accepted = std::move(cur);
                acceptedSub = nsub;
            }
            prev = std::move(cur);
        }
        if (!accepted)
            throw numerical_error("solve_backward: implicit step failed at step " +
                                  std::to_string(k) + " (t = " + std::to_string(grid.times[k]) +
                                  "), inner residual " + std::to_string(residual));
        sol.states[static_cast<std::size_t>(k)] = std::move(*accepted);
        // Warm-start the next step near the accepted resolution but let it
        // decay geometrically once the stiff region has passed.
        warmStart = std::max(1, acceptedSub / 4);
    }

    sol.boundsOk = false;
    sol.boundsMargin = std::numeric_limits<double>::quiet_NaN();
    sol.boundsTol = std::numeric_limits<double>::quiet_NaN();
    if (opts.runBoundsCheck) {
        const bool rIsZero = ou.R.isZero(0.0);
        const bool sigmaPd = min_eigenvalue(symmetrize(ou.Sigma)) > 0.0;
        if (rIsZero || sigmaPd) {
            // Tolerance scales with the solution's spectral radius.
            const Eigen::MatrixXd Gamma = symmetrize(exec.Gamma());
            const Eigen::MatrixXd sigT = integrated_covariance(ou.R, ou.Sigma, grid.T);
            double scale = spectral_radius(assemble_pblock(sol.states.front().A,
                                                           sol.states.front().B,
                                                           sol.states.front().C)
                                               .P);
            scale = std::max(scale, spectral_radius(Gamma));
            scale = std::max(scale, spectral_radius(0.5 * exec.gamma * sigT + Gamma));
            if (!rIsZero) {
                const Eigen::MatrixXd SigInvR = ou.Sigma.llt().solve(ou.R);
                scale = std::max(scale, spectral_radius(symmetrize(
                                            grid.T / (2.0 * exec.gamma) *
                                            ou.R.transpose() * SigInvR)));
            }
            // Tiny absolute floor so exact-zero instances tolerate rounding noise.
            const double tol = std::max(opts.boundsTolScale * scale, 1e-13);
            const BoundsReport rep = check_bounds(sol, ou, exec, tol);
            sol.boundsOk = rep.ok;
            sol.boundsMargin = rep.margin;
            sol.boundsTol = rep.tol;
        }
    }
    return sol;
}

BoundsReport check_bounds(const RiccatiSolution& sol, const OUParams& ou,
                          const ExecutionSpec& exec, double tol) {
    const Eigen::Index d = ou.d;
    const int N = sol.grid.N;
    const double dt = sol.grid.dt();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd Gamma = symmetrize(exec.Gamma());

    const bool rIsZero = ou.R.isZero(0.0);
    Eigen::MatrixXd upperSE;  // R' Sigma^{-1} R, zero when R = 0
    if (rIsZero) {
        upperSE = Eigen::MatrixXd::Zero(d, d);
    } else {
        if (!(min_eigenvalue(symmetrize(ou.Sigma)) > 0.0))
            throw numerical_error("check_bounds: upper bound requires invertible Sigma");
        upperSE = symmetrize(ou.R.transpose() * ou.Sigma.llt().solve(ou.R));
    }

    // Walk tau = T - t from 0 to T, extending Sigma_tau and e^{-R tau} one
    // grid step at a time: Sigma_{tau+dt} = Sigma_dt + E_dt Sigma_tau E_dt'.
    const Eigen::MatrixXd Edt = matrix_exp(-ou.R * dt);
    const Eigen::MatrixXd sigDt = integrated_covariance(ou.R, ou.Sigma, dt);
    Eigen::MatrixXd sigTau = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd Etau = Eigen::MatrixXd::Identity(d, d);

    double margin = std::numeric_limits<double>::infinity();
    for (int k = N; k >= 0; --k) {
        const double tau = dt * (N - k);
        const ODEState& s = sol.states[static_cast<std::size_t>(k)];
        const Eigen::MatrixXd P = assemble_pblock(s.A, s.B, s.C).P;

        Eigen::MatrixXd lower(2 * d, 2 * d);
        lower.topLeftCorner(d, d) = -0.5 * exec.gamma * sigTau - Gamma;
        lower.topRightCorner(d, d) = -0.5 * (I - Etau);
        lower.bottomLeftCorner(d, d) = lower.topRightCorner(d, d).transpose();
        lower.bottomRightCorner(d, d).setZero();

        Eigen::MatrixXd upper = Eigen::MatrixXd::Zero(2 * d, 2 * d);
        upper.bottomRightCorner(d, d) = tau / (2.0 * exec.gamma) * upperSE;

        margin = std::min(margin, min_eigenvalue(symmetrize(P - lower)));
        margin = std::min(margin, min_eigenvalue(symmetrize(upper - P)));

        if (k > 0) {
            sigTau = symmetrize(sigDt + Edt * sigTau * Edt.transpose());
            Etau = Edt * Etau;
        }
    }
    return BoundsReport{margin >= -tol, margin, tol};
}

ODEState RiccatiSolution::at(double t) const {
    const double T = grid.T;
    const double fuzz = 1e-12 * std::max(1.0, T);
    if (t < -fuzz || t > T + fuzz)
        throw std::out_of_range("RiccatiSolution::at: t = " + std::to_string(t) +
                                " outside [0, " + std::to_string(T) + "]");
    const double tc = std::min(std::max(t, 0.0), T);
    const double dt = grid.dt();
    int k = static_cast<int>(tc / dt);
    if (k >= grid.N) k = grid.N - 1;
    const double w = (tc - grid.times[static_cast<std::size_t>(k)]) / dt;

    const ODEState& a = states[static_cast<std::size_t>(k)];
    const ODEState& b = states[static_cast<std::size_t>(k) + 1];
    ODEState out;
    out.A = (1.0 - w) * a.A + w * b.A;
    out.B = (1.0 - w) * a.B + w * b.B;
    out.C = (1.0 - w) * a.C + w * b.C;
    out.D = (1.0 - w) * a.D + w * b.D;
    out.E = (1.0 - w) * a.E + w * b.E;
    out.F = (1.0 - w) * a.F + w * b.F;
    return out;
}

double theta_eval(const RiccatiSolution& sol, double t, const Eigen::VectorXd& q,
                  const Eigen::VectorXd& S) {
    const ODEState s = sol.at(t);
    return q.dot(s.A * q) + q.dot(s.B * S) + S.dot(s.C * S) + s.D.dot(q) + s.E.dot(S) + s.F;
}

double value_function(const RiccatiSolution& sol, double t, double x, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& S, const ExecutionSpec& exec) {
    const double exponent = -exec.gamma * (x + q.dot(S) + theta_eval(sol, t, q, S));
    if (!(std::abs(exponent) <= 700.0))
        throw numerical_error("value_function: exponent " + std::to_string(exponent) +
                              " outside safe range [-700, 700]");
    return -std::exp(exponent);
}

}  // namespace mou

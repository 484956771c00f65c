#include <doctest.h>

#include <cmath>
#include <random>

#include "mou/closed_form.hpp"
#include "mou/matrix_kit.hpp"
#include "mou/riccati.hpp"
#include "support/fixtures.hpp"

using namespace mou;

namespace {

ODEState random_state(int d, std::mt19937& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    ODEState s = ODEState::zero(d);
    for (int i = 0; i < d; ++i) {
        s.D[i] = g(rng);
        s.E[i] = g(rng);
        for (int j = 0; j < d; ++j) {
            s.A(i, j) = g(rng);
            s.B(i, j) = g(rng);
            s.C(i, j) = g(rng);
        }
    }
    s.A = symmetrize(s.A);
    s.C = symmetrize(s.C);
    s.F = g(rng);
    return s;
}

SolveOptions plain_implicit_euler() {
    // Disables the accuracy-triggered substepping so convergence-order tests
    // see the bare first-order scheme.
    SolveOptions opts;
    opts.localErrorTol = 1e30;
    opts.runBoundsCheck = false;
    return opts;
}

}  // namespace

TEST_CASE("ode_rhs at the terminal state reduces to the boundary derivatives") {
    fixtures::Instance pr = fixtures::equity_pair();
    ODEState s = ODEState::zero(2);
    s.A = -pr.exec.Gamma();

    const ODEState rhs = ode_rhs(1.0, s, pr.ou, pr.exec);
    const Eigen::MatrixXd etaInv = pr.exec.eta.inverse();
    const Eigen::MatrixXd Gamma = pr.exec.Gamma();

    const Eigen::MatrixXd expA =
        0.5 * pr.exec.gamma * pr.ou.Sigma - Gamma * etaInv * Gamma;
    CHECK((rhs.A - expA).cwiseAbs().maxCoeff() < 1e-9 * expA.cwiseAbs().maxCoeff());
    CHECK((rhs.B - pr.ou.R).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rhs.C.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((rhs.D + pr.ou.R * pr.ou.Sbar).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(rhs.E.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rhs.F == 0.0);
}

TEST_CASE("driftless dynamics admit the all-zero tail solution") {
    fixtures::Instance fx = fixtures::single_asset_fx();
    const OUParams ou = OUParams::brownian(fx.ou.Sigma);
    ODEState s = ODEState::zero(1);
    s.A(0, 0) = -3.0;
    const ODEState rhs = ode_rhs(0.3, s, ou, fx.exec);
    CHECK(rhs.B.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rhs.C.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rhs.D.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rhs.E.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rhs.F == 0.0);
}

TEST_CASE("compact_rhs of zero is the constant block Q") {
    fixtures::Instance pr = fixtures::equity_pair();
    const PBlock zero{Eigen::MatrixXd::Zero(4, 4)};
    const Eigen::MatrixXd got = compact_rhs(zero, pr.ou, pr.exec).P;
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(4, 4);
    Q.topLeftCorner(2, 2) = 0.5 * pr.exec.gamma * pr.ou.Sigma;
    Q.topRightCorner(2, 2) = 0.5 * pr.ou.R;
    Q.bottomLeftCorner(2, 2) = 0.5 * pr.ou.R.transpose();
    CHECK((got - Q).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("compact and expanded right-hand sides agree on random states") {
    std::mt19937 rng(2024);
    for (int d : {1, 2, 3}) {
        for (int trial = 0; trial < 350; ++trial) {
            const Eigen::MatrixXd eta = fixtures::random_spd(d, rng, 0.4, 2.5);
            const Eigen::MatrixXd Sigma = fixtures::random_spd(d, rng, 0.4, 2.5);
            const Eigen::MatrixXd R = fixtures::random_stable_generator(d, rng);
            std::normal_distribution<double> g(0.0, 1.0);
            Eigen::VectorXd Sbar(d);
            for (int i = 0; i < d; ++i) Sbar[i] = g(rng);
            const OUParams ou(R, Sbar, Sigma);
            const ExecutionSpec exec(eta, Eigen::MatrixXd::Zero(d, d), 0.7, 1.0);

            const ODEState s = random_state(d, rng);
            const ODEState expanded = ode_rhs(0.5, s, ou, exec);
            const PBlock got = compact_rhs(assemble_pblock(s.A, s.B, s.C), ou, exec);
            const PBlock want = assemble_pblock(expanded.A, expanded.B, expanded.C);
            CHECK((got.P - want.P).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("solve_backward on the fully degenerate instance stays at zero") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 1), eta(1, 1);
    eta << 1.0;
    const OUParams ou(z, Eigen::VectorXd::Zero(1), z);
    const ExecutionSpec exec(eta, z, 1.0, 1.0);
    const RiccatiSolution sol = solve_backward(ou, exec, TimeGrid(1.0, 50));
    for (const auto& s : sol.states) {
        CHECK(s.A.cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.B.cwiseAbs().maxCoeff() == 0.0);
        CHECK(std::abs(s.F) == 0.0);
    }
    CHECK(sol.boundsOk);
}

TEST_CASE("solve_backward matches the driftless closed form" * doctest::timeout(120)) {
    fixtures::Instance fx = fixtures::single_asset_fx();
    const OUParams ou = OUParams::brownian(fx.ou.Sigma);
    const RiccatiSolution sol = solve_backward(ou, fx.exec, TimeGrid(1.0, 20000));
    const BrownianClosedForm cf(ou, fx.exec);

    // At the start of the horizon (where the strategy is evaluated) the sweep
    // reproduces the analytic solution to near machine precision.
    const double a0 = sol.states[0].A(0, 0);
    const double ref0 = cf.A(0.0)(0, 0);
    CHECK(std::abs(a0 - ref0) / std::abs(ref0) < 1e-6);

    // Across the whole grid the first-order sweep is within the stiff
    // penalty-layer limit (the terminal nodes dominate the error).
    double worstAbs = 0.0, scale = 0.0;
    for (int k = 0; k <= sol.grid.N; ++k) {
        const double ref = cf.A(sol.grid.times[static_cast<std::size_t>(k)])(0, 0);
        worstAbs =
            std::max(worstAbs, std::abs(sol.states[static_cast<std::size_t>(k)].A(0, 0) - ref));
        scale = std::max(scale, std::abs(ref));
    }
    CHECK(worstAbs / scale < 5e-4);
    CHECK(sol.boundsOk);
    // Terminal condition exact.
    CHECK(sol.states.back().A(0, 0) == -100.0);
}

TEST_CASE("implicit Euler sweep is first order (self-consistency on the pair)") {
    fixtures::Instance pr = fixtures::equity_pair();
    const SolveOptions opts = plain_implicit_euler();
    const RiccatiSolution s1 = solve_backward(pr.ou, pr.exec, TimeGrid(1.0, 500), opts);
    const RiccatiSolution s2 = solve_backward(pr.ou, pr.exec, TimeGrid(1.0, 1000), opts);
    // Reference 32x finer so its own error does not bias the measured ratio.
    const RiccatiSolution sRef = solve_backward(pr.ou, pr.exec, TimeGrid(1.0, 16000), opts);

    // Aggregate per-block relative errors at shared nodes, away from the
    // terminal penalty layer; the heterogeneous block scales all contribute.
    auto err = [&](const RiccatiSolution& coarse, int stride) {
        double e = 0.0;
        const int nodes = 500 - 25;  // drop the last 5% of the horizon
        for (int k = 0; k <= nodes; ++k) {
            const ODEState& a = coarse.states[static_cast<std::size_t>(k * stride)];
            const ODEState& b = sRef.states[static_cast<std::size_t>(k * 32)];
            e += (a.A - b.A).cwiseAbs().maxCoeff() / std::max(1e-300, b.A.cwiseAbs().maxCoeff());
            e += (a.C - b.C).cwiseAbs().maxCoeff() / std::max(1e-300, b.C.cwiseAbs().maxCoeff());
        }
        return e;
    };
    const double ratio = err(s1, 1) / err(s2, 2);
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
}

TEST_CASE("grid refinement halves the error against a 10x RK4 reference") {
    // Gentle driftless instance: the reference integrator is a higher-order
    // method on a 10x finer grid, independent of the implicit sweep.
    Eigen::MatrixXd eta(1, 1), Sigma(1, 1), Gamma(1, 1);
    eta << 1.0;
    Sigma << 1.0;
    Gamma << 0.8;
    const OUParams ou = OUParams::brownian(Sigma);
    const ExecutionSpec exec(eta, Gamma, 0.5, 1.0);

    const SolveOptions opts = plain_implicit_euler();
    const int N = 400;
    const RiccatiSolution sN = solve_backward(ou, exec, TimeGrid(1.0, N), opts);
    const RiccatiSolution s2N = solve_backward(ou, exec, TimeGrid(1.0, 2 * N), opts);
    const auto ref = fixtures::rk4_reference(ou, exec, 10 * N);

    double eN = 0.0, e2N = 0.0;
    for (int k = 0; k <= N; ++k) {
        eN = std::max(eN, std::abs(sN.states[static_cast<std::size_t>(k)].A(0, 0) -
                                   ref[static_cast<std::size_t>(10 * k)].A(0, 0)));
        e2N = std::max(e2N, std::abs(s2N.states[static_cast<std::size_t>(2 * k)].A(0, 0) -
                                     ref[static_cast<std::size_t>(10 * k)].A(0, 0)));
    }
    const double ratio = eN / e2N;
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
}

TEST_CASE("centered differences of the solution match compact_rhs") {
    Eigen::MatrixXd eta(1, 1), Sigma(1, 1), Gamma(1, 1);
    eta << 1.0;
    Sigma << 1.0;
    Gamma << 0.5;
    const OUParams ou = OUParams::brownian(Sigma);
    const ExecutionSpec exec(eta, Gamma, 0.4, 1.0);
    const SolveOptions opts = plain_implicit_euler();

    auto fd_error = [&](int N) {
        const RiccatiSolution sol = solve_backward(ou, exec, TimeGrid(1.0, N), opts);
        const double dt = sol.grid.dt();
        double worst = 0.0;
        for (int k = N / 10; k < N - N / 10; k += N / 50) {
            const auto& sm = sol.states[static_cast<std::size_t>(k - 1)];
            const auto& s0 = sol.states[static_cast<std::size_t>(k)];
            const auto& sp = sol.states[static_cast<std::size_t>(k + 1)];
            const double fd = (sp.A(0, 0) - sm.A(0, 0)) / (2.0 * dt);
            const double rhs =
                compact_rhs(assemble_pblock(s0.A, s0.B, s0.C), ou, exec).P(0, 0);
            worst = std::max(worst, std::abs(fd - rhs));
        }
        return worst;
    };
    const double e1 = fd_error(400);
    const double e2 = fd_error(800);
    CHECK(e2 < e1);        // shrinks under refinement
    CHECK(e1 / e2 > 1.5);  // roughly first order
}

TEST_CASE("check_bounds is tight at the terminal instant") {
    fixtures::Instance pr = fixtures::equity_pair();
    const RiccatiSolution sol = solve_backward(pr.ou, pr.exec, TimeGrid(1.0, 300));
    // At t = T the lower envelope equals P(T) and the upper envelope is zero.
    const ODEState& last = sol.states.back();
    const Eigen::MatrixXd P = assemble_pblock(last.A, last.B, last.C).P;
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(4, 4);
    lower.topLeftCorner(2, 2) = -pr.exec.Gamma();
    CHECK((P - lower).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(psd_leq(P, Eigen::MatrixXd::Zero(4, 4), 1e-12));
}

TEST_CASE("bounds certification passes on the pair instance") {
    fixtures::Instance pr = fixtures::equity_pair();
    const RiccatiSolution sol = solve_backward(pr.ou, pr.exec, TimeGrid(1.0, 2000));
    CHECK(sol.boundsOk);
    const BoundsReport rep = check_bounds(sol, pr.ou, pr.exec, sol.boundsTol);
    CHECK(rep.ok);
    CHECK(rep.margin >= -rep.tol);
}

TEST_CASE("check_bounds requires an invertible Sigma when R is nonzero") {
    fixtures::Instance pr = fixtures::equity_pair();
    OUParams bad = pr.ou;
    bad.Sigma.setZero();
    SolveOptions opts;
    opts.runBoundsCheck = false;
    const RiccatiSolution sol = solve_backward(bad, pr.exec, TimeGrid(1.0, 100), opts);
    CHECK_THROWS_AS(check_bounds(sol, bad, pr.exec, 1e-9), numerical_error);
}

TEST_CASE("driftless solutions keep the tail blocks at zero and A below zero") {
    fixtures::Instance fx = fixtures::single_asset_fx();
    const OUParams ou = OUParams::brownian(fx.ou.Sigma);
    const RiccatiSolution sol = solve_backward(ou, fx.exec, TimeGrid(1.0, 1000));
    for (const auto& s : sol.states) {
        CHECK(s.B.cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(s.C.cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(s.D.cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(s.E.cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(std::abs(s.F) <= 1e-10);
        CHECK(s.A(0, 0) <= 0.0);  // zero upper envelope in the driftless case
    }
}

TEST_CASE("solved coefficient matrices stay symmetric") {
    fixtures::Instance pr = fixtures::equity_pair(2e-3);
    const RiccatiSolution sol = solve_backward(pr.ou, pr.exec, TimeGrid(1.0, 1500));
    for (const auto& s : sol.states) {
        const double aScale = std::max(1e-300, s.A.cwiseAbs().maxCoeff());
        const double cScale = std::max(1e-300, s.C.cwiseAbs().maxCoeff());
        CHECK((s.A - s.A.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * aScale);
        CHECK((s.C - s.C.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * cScale);
    }
}

TEST_CASE("theta_eval honours the terminal condition and the range contract") {
    fixtures::Instance pr = fixtures::equity_pair();
    const RiccatiSolution sol = solve_backward(pr.ou, pr.exec, TimeGrid(1.0, 400));
    std::mt19937 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd q(2), S(2);
        q << 1e4 * g(rng), 1e4 * g(rng);
        S << 54.0 + g(rng), 27.0 + g(rng);
        const double got = theta_eval(sol, 1.0, q, S);
        const double want = -q.dot(pr.exec.Gamma() * q);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS_AS(theta_eval(sol, 1.5, pr.q0, pr.S0), std::out_of_range);
    CHECK_THROWS_AS(theta_eval(sol, -0.2, pr.q0, pr.S0), std::out_of_range);
}

TEST_CASE("theta_eval of the driftless zero-inventory problem vanishes") {
    fixtures::Instance fx = fixtures::single_asset_fx();
    const OUParams ou = OUParams::brownian(fx.ou.Sigma);
    const RiccatiSolution sol = solve_backward(ou, fx.exec, TimeGrid(1.0, 500));
    CHECK(std::abs(theta_eval(sol, 0.37, Eigen::VectorXd::Zero(1), fx.S0)) < 1e-9);
}

TEST_CASE("interpolated solution satisfies the HJB residual") {
    // Residual of the nonlinear PDE reduced onto the quadratic ansatz, with a
    // finite-difference time derivative. Run on a unit-scale instance: at raw
    // market scales the net time derivative is a ~1e3:1 cancellation between
    // coefficient terms, which amplifies the first-order sweep defect past
    // any practical grid (the exact-derivative identity below covers that
    // regime instead).
    Eigen::MatrixXd R(2, 2), Sigma(2, 2);
    R << 1.2, 0.4, -0.3, 0.9;
    Sigma << 0.5, 0.1, 0.1, 0.4;
    Eigen::VectorXd Sbar(2);
    Sbar << 0.8, 1.1;
    const OUParams ou(R, Sbar, Sigma);
    const ExecutionSpec exec(0.8 * Eigen::MatrixXd::Identity(2, 2),
                             0.3 * Eigen::MatrixXd::Identity(2, 2), 0.6, 1.0);

    const int N = 20000;
    const RiccatiSolution sol = solve_backward(ou, exec, TimeGrid(1.0, N));
    const Eigen::MatrixXd etaInv = exec.eta.inverse();
    const double dt = sol.grid.dt();
    const double h = 200.0 * dt;

    std::mt19937 rng(17);
    std::uniform_int_distribution<int> pick(201, N - 201);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = pick(rng);
        const double t = sol.grid.times[static_cast<std::size_t>(k)];
        Eigen::VectorXd q(2), S(2);
        q << g(rng), g(rng);
        S << 0.8 + 0.5 * g(rng), 1.1 + 0.5 * g(rng);

        const double dTheta =
            (theta_eval(sol, t + h, q, S) - theta_eval(sol, t - h, q, S)) / (2.0 * h);

        const ODEState s = sol.at(t);
        const Eigen::VectorXd gradQ = 2.0 * (s.A * q) + s.B * S + s.D;
        const Eigen::VectorXd gradS = s.B.transpose() * q + 2.0 * (s.C * S) + s.E;
        const Eigen::VectorXd qPlusGradS = q + gradS;

        const double term2 = 0.25 * gradQ.dot(etaInv * gradQ);
        const double term3 = (ou.Sigma * s.C).trace();
        const double term4 = -0.5 * exec.gamma * qPlusGradS.dot(ou.Sigma * qPlusGradS);
        const double term5 = (ou.Sbar - S).dot(ou.R.transpose() * qPlusGradS);
        const double scale = std::max({std::abs(dTheta), std::abs(term2), std::abs(term3),
                                       std::abs(term4), std::abs(term5), 1.0});

        const double residual = dTheta + term2 + term3 + term4 + term5;
        CHECK(std::abs(residual) / scale < 1e-3);
    }

    // At raw market scales, verify the identity with the exact coefficient
    // derivative: the ODE right-hand side is the ansatz reduction of the PDE.
    fixtures::Instance pr = fixtures::equity_pair(2e-5);
    const RiccatiSolution psol = solve_backward(pr.ou, pr.exec, TimeGrid(1.0, 2000));
    const Eigen::MatrixXd etaInvP = pr.exec.eta.inverse();
    for (int trial = 0; trial < 100; ++trial) {
        const double t = 0.97 * static_cast<double>(trial) / 100;
        Eigen::VectorXd q(2), S(2);
        q << 5e4 * g(rng), 5e4 * g(rng);
        S << 54.23 + 0.5 * g(rng), 27.45 + 0.5 * g(rng);
        const ODEState s = psol.at(t);
        const ODEState r = ode_rhs(t, s, pr.ou, pr.exec);
        const double dThetaExact = q.dot(r.A * q) + q.dot(r.B * S) + S.dot(r.C * S) +
                                   r.D.dot(q) + r.E.dot(S) + r.F;
        const Eigen::VectorXd gradQ = 2.0 * (s.A * q) + s.B * S + s.D;
        const Eigen::VectorXd gradS = s.B.transpose() * q + 2.0 * (s.C * S) + s.E;
        const Eigen::VectorXd qPlusGradS = q + gradS;
        const double term2 = 0.25 * gradQ.dot(etaInvP * gradQ);
        const double term3 = (pr.ou.Sigma * s.C).trace();
        const double term4 = -0.5 * pr.exec.gamma * qPlusGradS.dot(pr.ou.Sigma * qPlusGradS);
        const double term5 = (pr.ou.Sbar - S).dot(pr.ou.R.transpose() * qPlusGradS);
        const double scale = std::max({std::abs(dThetaExact), std::abs(term2), std::abs(term3),
                                       std::abs(term4), std::abs(term5), 1.0});
        CHECK(std::abs(dThetaExact + term2 + term3 + term4 + term5) / scale < 1e-9);
    }
}

TEST_CASE("value_function basics and overflow guard") {
    fixtures::Instance fx = fixtures::single_asset_fx();
    const OUParams ou = OUParams::brownian(fx.ou.Sigma);
    const RiccatiSolution sol = solve_backward(ou, fx.exec, TimeGrid(1.0, 200));

    const Eigen::VectorXd q0 = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd S = fx.S0;
    const double w = value_function(sol, 1.0, 1000.0, q0, S, fx.exec);
    CHECK(w == doctest::Approx(-std::exp(-fx.exec.gamma * 1000.0)).epsilon(1e-12));

    // Monotone in cash.
    CHECK(value_function(sol, 0.4, 500.0, q0, S, fx.exec) <
          value_function(sol, 0.4, 2000.0, q0, S, fx.exec));

    CHECK_THROWS_AS(value_function(sol, 1.0, 1e12, q0, S, fx.exec), numerical_error);
}

TEST_CASE("solve_backward validates inputs up front") {
    fixtures::Instance fx = fixtures::single_asset_fx();
    ExecutionSpec bad = fx.exec;
    bad.eta(0, 0) = -1.0;
    CHECK_THROWS_AS(solve_backward(fx.ou, bad, TimeGrid(1.0, 100)), validation_error);
    CHECK_THROWS_AS(solve_backward(fx.ou, fx.exec, TimeGrid(2.0, 100)), validation_error);
}

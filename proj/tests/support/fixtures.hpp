#ifndef MOU_TESTS_FIXTURES_HPP
#define MOU_TESTS_FIXTURES_HPP

#include <random>
#include <vector>

#include "mou/model.hpp"
#include "mou/riccati.hpp"

namespace fixtures {

struct Instance {
    mou::OUParams ou;
    mou::ExecutionSpec exec;
    Eigen::VectorXd q0;
    Eigen::VectorXd S0;
};

// Single FX futures contract, one trading day. Intraday-estimated
// mean-reverting dynamics with a strong terminal penalty for liquidation runs.
inline Instance single_asset_fx() {
    Instance in;
    Eigen::MatrixXd R(1, 1), Sigma(1, 1), eta(1, 1), GammaTilde(1, 1);
    R << 5.1;
    Sigma << 243.67 * 243.67;
    eta << 5e-3;
    GammaTilde << 100.0;
    Eigen::VectorXd Sbar(1), q0(1), S0(1);
    Sbar << 79887.0;
    q0 << 2250.0;
    S0 << 79835.0;
    in.ou = mou::OUParams(R, Sbar, Sigma);
    in.exec = mou::ExecutionSpec(eta, GammaTilde, 2e-5, 1.0);
    in.q0 = q0;
    in.S0 = S0;
    return in;
}

// Cointegrated bank-stock pair, one trading day.
inline Instance equity_pair(double gamma = 2e-5) {
    Instance in;
    Eigen::MatrixXd R(2, 2), Sigma(2, 2);
    R << 0.33, 3.95, -2.52, 10.23;
    Sigma << 0.47, 0.20, 0.20, 0.14;
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(2, 2);
    eta(0, 0) = 4e-7;
    eta(1, 1) = 2e-7;
    Eigen::MatrixXd GammaTilde = 100.0 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd Sbar(2), q0(2), S0(2);
    Sbar << 54.23, 27.45;
    q0 << 75000.0, 75000.0;
    S0 << 54.4, 27.48;
    in.ou = mou::OUParams(R, Sbar, Sigma);
    in.exec = mou::ExecutionSpec(eta, GammaTilde, gamma, 1.0);
    in.q0 = q0;
    in.S0 = S0;
    return in;
}

inline Eigen::MatrixXd random_orthogonal(int d, std::mt19937& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = g(rng);
    return Eigen::HouseholderQR<Eigen::MatrixXd>(M).householderQ();
}

/// Well-conditioned SPD matrix with eigenvalues in [lo, hi].
inline Eigen::MatrixXd random_spd(int d, std::mt19937& rng, double lo = 0.5, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd Q = random_orthogonal(d, rng);
    Eigen::VectorXd ev(d);
    for (int i = 0; i < d; ++i) ev[i] = u(rng);
    return Q * ev.asDiagonal() * Q.transpose();
}

/// PSD matrix with eigenvalues in [0, hi] (some may be zero).
inline Eigen::MatrixXd random_psd(int d, std::mt19937& rng, double hi = 1.0) {
    std::uniform_real_distribution<double> u(0.0, hi);
    std::bernoulli_distribution zero(0.3);
    Eigen::MatrixXd Q = random_orthogonal(d, rng);
    Eigen::VectorXd ev(d);
    for (int i = 0; i < d; ++i) ev[i] = zero(rng) ? 0.0 : u(rng);
    return Q * ev.asDiagonal() * Q.transpose();
}

/// Generator with all eigenvalues in the right half plane (mean-reverting).
inline Eigen::MatrixXd random_stable_generator(int d, std::mt19937& rng, double lo = 0.5,
                                               double hi = 8.0) {
    Eigen::MatrixXd S = random_spd(d, rng, lo, hi);
    // A skew perturbation moves eigenvalues off the real axis without
    // leaving the right half plane (field of values stays positive).
    std::normal_distribution<double> g(0.0, 0.15 * lo);
    Eigen::MatrixXd W(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) W(i, j) = g(rng);
    return S + 0.5 * (W - W.transpose());
}

// ---- reference RK4 integrator (oracle only, not the production path) ----

inline mou::ODEState state_axpy(const mou::ODEState& base, double c, const mou::ODEState& dir) {
    mou::ODEState out = base;
    out.A += c * dir.A;
    out.B += c * dir.B;
    out.C += c * dir.C;
    out.D += c * dir.D;
    out.E += c * dir.E;
    out.F += c * dir.F;
    return out;
}

/// Classic RK4 sweep of the full coefficient system from T down to 0 on a
/// uniform grid with `steps` intervals. Returns all grid nodes (index k at
/// t_k = k T / steps).
inline std::vector<mou::ODEState> rk4_reference(const mou::OUParams& ou,
                                                const mou::ExecutionSpec& exec, int steps) {
    const double h = exec.T / steps;
    std::vector<mou::ODEState> nodes(static_cast<std::size_t>(steps) + 1);
    mou::ODEState z = mou::ODEState::zero(ou.d);
    z.A = -0.5 * (exec.Gamma() + exec.Gamma().transpose());
    nodes[static_cast<std::size_t>(steps)] = z;

    for (int k = steps - 1; k >= 0; --k) {
        const double t = exec.T * (k + 1) / steps;  // integrate backward in t
        // dz/dtau = -f(z) with tau = T - t
        const mou::ODEState k1 = mou::ode_rhs(t, z, ou, exec);
        const mou::ODEState k2 = mou::ode_rhs(t - 0.5 * h, state_axpy(z, -0.5 * h, k1), ou, exec);
        const mou::ODEState k3 = mou::ode_rhs(t - 0.5 * h, state_axpy(z, -0.5 * h, k2), ou, exec);
        const mou::ODEState k4 = mou::ode_rhs(t - h, state_axpy(z, -h, k3), ou, exec);
        mou::ODEState sum = state_axpy(k1, 1.0, k4);
        sum = state_axpy(sum, 2.0, k2);
        sum = state_axpy(sum, 2.0, k3);
        z = state_axpy(z, -h / 6.0, sum);
        nodes[static_cast<std::size_t>(k)] = z;
    }
    return nodes;
}

inline double state_max_diff(const mou::ODEState& a, const mou::ODEState& b) {
    double m = std::abs(a.F - b.F);
    m = std::max(m, (a.A - b.A).cwiseAbs().maxCoeff());
    m = std::max(m, (a.B - b.B).cwiseAbs().maxCoeff());
    m = std::max(m, (a.C - b.C).cwiseAbs().maxCoeff());
    m = std::max(m, (a.D - b.D).cwiseAbs().maxCoeff());
    m = std::max(m, (a.E - b.E).cwiseAbs().maxCoeff());
    return m;
}

}  // namespace fixtures

#endif  // MOU_TESTS_FIXTURES_HPP

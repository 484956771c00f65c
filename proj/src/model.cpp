#include "mou/model.hpp"

#include <cmath>
#include <sstream>

#include "mou/matrix_kit.hpp"

namespace mou {

namespace {

bool all_finite(const Eigen::MatrixXd& M) { return M.allFinite(); }

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace

OUParams::OUParams(Eigen::MatrixXd R_, Eigen::VectorXd Sbar_, Eigen::MatrixXd Sigma_)
    : d(R_.rows()), R(std::move(R_)), Sbar(std::move(Sbar_)), Sigma(std::move(Sigma_)) {}

OUParams OUParams::brownian(const Eigen::MatrixXd& sigma) {
    const Eigen::Index n = sigma.rows();
    return OUParams(Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), sigma);
}

ExecutionSpec::ExecutionSpec(Eigen::MatrixXd eta_, Eigen::MatrixXd GammaTilde_, double gamma_,
                             double T_)
    : eta(std::move(eta_)),
      K(Eigen::MatrixXd::Zero(eta.rows(), eta.cols())),
      GammaTilde(std::move(GammaTilde_)),
      gamma(gamma_),
      T(T_) {}

ExecutionSpec::ExecutionSpec(Eigen::MatrixXd eta_, Eigen::MatrixXd K_, Eigen::MatrixXd GammaTilde_,
                             double gamma_, double T_)
    : eta(std::move(eta_)),
      K(std::move(K_)),
      GammaTilde(std::move(GammaTilde_)),
      gamma(gamma_),
      T(T_) {}

TimeGrid::TimeGrid(double T_, int N_) : T(T_), N(N_) {
    if (!(T > 0.0)) throw validation_error("TimeGrid: horizon T must be positive");
    if (N < 2) throw validation_error("TimeGrid: need at least N = 2 steps");
    times.resize(static_cast<std::size_t>(N) + 1);
    for (int k = 0; k <= N; ++k) times[static_cast<std::size_t>(k)] = T * k / N;
    times.front() = 0.0;
    times.back() = T;
}

ExecutionState::ExecutionState(double t_, Eigen::VectorXd q_, Eigen::VectorXd S_)
    : t(t_), q(std::move(q_)), S(std::move(S_)), Stilde(S), X(0.0) {}

ExecutionState::ExecutionState(double t_, Eigen::VectorXd q_, Eigen::VectorXd S_,
                               Eigen::VectorXd Stilde_, double X_)
    : t(t_), q(std::move(q_)), S(std::move(S_)), Stilde(std::move(Stilde_)), X(X_) {}

void MarketPath::validate() const {
    if (prices.rows() != times.size())
        throw validation_error("MarketPath: row count does not match number of timestamps");
    if (times.size() < 2) throw validation_error("MarketPath: need at least two observations");
    if (!times.allFinite() || !prices.allFinite())
        throw validation_error("MarketPath: non-finite entry");
    for (Eigen::Index i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw validation_error("MarketPath: timestamps not strictly increasing at row " +
                                   std::to_string(i));
}

std::vector<std::string> validate_spec(const OUParams& ou, const ExecutionSpec& exec) {
    std::vector<std::string> out;
    const Eigen::Index d = ou.d;

    if (d < 1) out.push_back("dimension d must be at least 1");
    if (ou.R.rows() != d || ou.R.cols() != d) out.push_back("R is not d x d");
    if (ou.Sbar.size() != d) out.push_back("Sbar is not a d-vector");
    if (ou.Sigma.rows() != d || ou.Sigma.cols() != d) out.push_back("Sigma is not d x d");
    if (!out.empty()) return out;  // shape errors make the rest meaningless

    if (!all_finite(ou.R) || !all_finite(ou.Sbar) || !all_finite(ou.Sigma))
        out.push_back("OU parameters contain non-finite entries");

    const double sigAsym = (ou.Sigma - ou.Sigma.transpose()).cwiseAbs().maxCoeff();
    if (sigAsym > 1e-9 * std::max(1.0, ou.Sigma.cwiseAbs().maxCoeff()))
        out.push_back("Sigma not symmetric (max asymmetry " + fmt(sigAsym) + ")");
    else {
        const double lo = min_eigenvalue(symmetrize(ou.Sigma));
        const double rad = spectral_radius(symmetrize(ou.Sigma));
        if (lo < -kPsdRelTol * rad)
            out.push_back("Sigma not positive semi-definite (min eigenvalue " + fmt(lo) + ")");
    }

    if (exec.eta.rows() != d || exec.eta.cols() != d)
        out.push_back("eta dimension does not match d");
    else if (!all_finite(exec.eta))
        out.push_back("eta contains non-finite entries");
    else if ((exec.eta - exec.eta.transpose()).cwiseAbs().maxCoeff() >
             1e-9 * std::max(1.0, exec.eta.cwiseAbs().maxCoeff()))
        out.push_back("eta not symmetric");
    else {
        const double lo = min_eigenvalue(symmetrize(exec.eta));
        if (!(lo > 0.0))
            out.push_back("eta not positive definite (min eigenvalue " + fmt(lo) + ")");
    }

    if (exec.K.rows() != d || exec.K.cols() != d)
        out.push_back("K dimension does not match d");
    else if ((exec.K - exec.K.transpose()).cwiseAbs().maxCoeff() >
             1e-9 * std::max(1.0, exec.K.cwiseAbs().maxCoeff()))
        out.push_back("K not symmetric");

    if (exec.GammaTilde.rows() != d || exec.GammaTilde.cols() != d)
        out.push_back("GammaTilde dimension does not match d");
    else if ((exec.GammaTilde - exec.GammaTilde.transpose()).cwiseAbs().maxCoeff() >
             1e-9 * std::max(1.0, exec.GammaTilde.cwiseAbs().maxCoeff()))
        out.push_back("GammaTilde not symmetric");
    else if (exec.K.rows() == d && exec.K.cols() == d) {
        const Eigen::MatrixXd G = symmetrize(exec.Gamma());
        const double lo = min_eigenvalue(G);
        const double rad = spectral_radius(G);
        if (lo < -kPsdRelTol * std::max(rad, 1e-300))
            out.push_back("Gamma = GammaTilde - K/2 not PSD (min eigenvalue " + fmt(lo) + ")");
    }

    if (!(exec.gamma > 0.0)) out.push_back("gamma must be positive");
    if (!std::isfinite(exec.gamma)) out.push_back("gamma must be finite");
    if (!(exec.T > 0.0) || !std::isfinite(exec.T)) out.push_back("T must be positive and finite");

    return out;
}

void require_valid(const OUParams& ou, const ExecutionSpec& exec) {
    const auto violations = validate_spec(ou, exec);
    if (violations.empty()) return;
    std::string msg = "invalid model parameters:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw validation_error(msg);
}

double terminal_wealth(const ExecutionState& state, const ExecutionSpec& exec,
                       bool use_market_price) {
    if (use_market_price)
        return state.X + state.q.dot(state.Stilde) -
               state.q.dot(exec.GammaTilde * state.q);
    return state.X + state.q.dot(state.S) - state.q.dot(exec.Gamma() * state.q);
}

}  // namespace mou

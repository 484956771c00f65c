#include "mou/closed_form.hpp"

#include <cmath>

#include "mou/matrix_kit.hpp"

namespace mou {

BrownianClosedForm::BrownianClosedForm(const OUParams& ou, const ExecutionSpec& exec)
    : T_(exec.T) {
    if (!ou.R.isZero(0.0))
        throw validation_error("BrownianClosedForm: requires R = 0 (driftless prices)");
    if (!(min_eigenvalue(symmetrize(ou.Sigma)) > 0.0))
        throw numerical_error("BrownianClosedForm: requires positive definite Sigma");
    require_valid(ou, exec);

    etaHalf_ = sqrt_psd(exec.eta);
    etaHalfInv_ = inv_sqrt_spd(exec.eta);
    const Eigen::MatrixXd M = symmetrize(etaHalfInv_ * ou.Sigma * etaHalfInv_);
    Ahat_ = std::sqrt(0.5 * exec.gamma) * sqrt_psd(M);
    Cmat_ = symmetrize(etaHalfInv_ * exec.Gamma() * etaHalfInv_);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ahat_);
    eigs_ = es.eigenvalues();
    vecs_ = es.eigenvectors();
    if (!(eigs_.minCoeff() > 0.0))
        throw numerical_error("BrownianClosedForm: Ahat is not positive definite");

    CpAinv_ = (Cmat_ + Ahat_).llt().solve(Eigen::MatrixXd::Identity(Ahat_.rows(), Ahat_.cols()));
}

Eigen::MatrixXd BrownianClosedForm::expAhat(double tau) const {
    const Eigen::VectorXd e = (-eigs_.array() * tau).exp();
    return vecs_ * e.asDiagonal() * vecs_.transpose();
}

Eigen::MatrixXd BrownianClosedForm::xi(double t) const {
    const double tau = T_ - t;
    const Eigen::Index d = Ahat_.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

    // -Ahat^{-1}/2 (I - e^{-2 Ahat tau}) shares the eigenbasis of Ahat.
    const Eigen::VectorXd w =
        (-0.5 * (1.0 - (-2.0 * eigs_.array() * tau).exp()) / eigs_.array()).matrix();
    const Eigen::MatrixXd first = vecs_ * w.asDiagonal() * vecs_.transpose();
    const Eigen::MatrixXd eTau = expAhat(tau);
    return symmetrize(first - eTau * CpAinv_ * eTau);
}

Eigen::MatrixXd BrownianClosedForm::A(double t) const {
    const Eigen::MatrixXd x = xi(t);
    const Eigen::MatrixXd xInv =
        x.partialPivLu().solve(Eigen::MatrixXd::Identity(x.rows(), x.cols()));
    return symmetrize(etaHalf_ * (Ahat_ + xInv) * etaHalf_);
}

Eigen::MatrixXd brownian_A(const OUParams& ou, const ExecutionSpec& exec, double t) {
    return BrownianClosedForm(ou, exec).A(t);
}

Eigen::MatrixXd riccati_flow_xi(const OUParams& ou, const ExecutionSpec& exec, double t) {
    return BrownianClosedForm(ou, exec).xi(t);
}

MertonSolution::MertonSolution(const OUParams& ou, double gamma, double T)
    : gamma_(gamma), T_(T), R_(ou.R), Sbar_(ou.Sbar) {
    if (!(gamma > 0.0)) throw validation_error("MertonSolution: gamma must be positive");
    if (!(T > 0.0)) throw validation_error("MertonSolution: T must be positive");
    if (!(min_eigenvalue(symmetrize(ou.Sigma)) > 0.0))
        throw numerical_error("MertonSolution: requires positive definite Sigma");

    SigInvR_ = ou.Sigma.llt().solve(ou.R);
    RtSiR_ = symmetrize(ou.R.transpose() * SigInvR_);
    trRtSiRSigma_ = (RtSiR_ * ou.Sigma).trace();
    sbarQuad_ = Sbar_.dot(RtSiR_ * Sbar_);
}

Eigen::MatrixXd MertonSolution::Chat(double t) const {
    return (T_ - t) / (2.0 * gamma_) * RtSiR_;
}

Eigen::VectorXd MertonSolution::Ehat(double t) const {
    return -(T_ - t) / gamma_ * (RtSiR_ * Sbar_);
}

double MertonSolution::Fhat(double t) const {
    // Integrates Fhat' = -Tr(Chat Sigma) - Sbar' R' Sigma^{-1} R Sbar / (2 gamma)
    // exactly from the terminal condition Fhat(T) = 0.
    const double tau = T_ - t;
    return tau * tau / (4.0 * gamma_) * trRtSiRSigma_ + tau / (2.0 * gamma_) * sbarQuad_;
}

double MertonSolution::theta(double t, const Eigen::VectorXd& S) const {
    return S.dot(Chat(t) * S) + Ehat(t).dot(S) + Fhat(t);
}

Eigen::VectorXd MertonSolution::position(double t, const Eigen::VectorXd& S) const {
    const Eigen::Index d = R_.rows();
    const Eigen::MatrixXd lever =
        Eigen::MatrixXd::Identity(d, d) + (T_ - t) * R_.transpose();
    return (1.0 / gamma_) * lever * (SigInvR_ * (Sbar_ - S));
}

double merton_theta(const OUParams& ou, double gamma, double T, double t,
                    const Eigen::VectorXd& S) {
    return MertonSolution(ou, gamma, T).theta(t, S);
}

Eigen::VectorXd merton_position(const OUParams& ou, double gamma, double T, double t,
                                const Eigen::VectorXd& S) {
    return MertonSolution(ou, gamma, T).position(t, S);
}

}  // namespace mou

#include "mou/matrix_kit.hpp"

#include <cmath>
#include <string>

namespace mou {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

double min_eigenvalue(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double spectral_radius(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_psd(const Eigen::MatrixXd& sym, double relTol) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double rad = es.eigenvalues().cwiseAbs().maxCoeff();
    return lo >= -relTol * std::max(rad, 1e-300);
}

namespace {

// Degree-13 Pade numerator/denominator split: exp(A) ~ (V+U)(V-U)^{-1}.
void pade13(const Eigen::MatrixXd& A, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const Eigen::Index n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd A2 = A * A;
    const Eigen::MatrixXd A4 = A2 * A2;
    const Eigen::MatrixXd A6 = A4 * A2;
    Eigen::MatrixXd tmp = A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2);
    tmp += b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I;
    U.noalias() = A * tmp;
    V.noalias() = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2);
    V += b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

}  // namespace

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw numerical_error("matrix_exp: matrix must be square");
    if (!M.allFinite()) throw numerical_error("matrix_exp: non-finite input");

    // theta_13: largest 1-norm for which the degree-13 approximant alone
    // meets double precision (Higham's scaling thresholds).
    constexpr double theta13 = 5.371920351148152;
    const double l1norm = M.cwiseAbs().colwise().sum().maxCoeff();
    if (l1norm == 0.0) return Eigen::MatrixXd::Identity(M.rows(), M.cols());

    int squarings = 0;
    Eigen::MatrixXd A = M;
    if (l1norm > theta13) {
        std::frexp(l1norm / theta13, &squarings);
        if (squarings < 0) squarings = 0;
        A = M * std::ldexp(1.0, -squarings);
    }

    Eigen::MatrixXd U, V;
    pade13(A, U, V);
    const Eigen::MatrixXd numer = V + U;
    const Eigen::MatrixXd denom = V - U;
    Eigen::MatrixXd result = denom.partialPivLu().solve(numer);
    for (int i = 0; i < squarings; ++i) result = result * result;

    if (!result.allFinite())
        throw numerical_error("matrix_exp: overflow for matrix with 1-norm " +
                              std::to_string(l1norm));
    return result;
}

Eigen::MatrixXd integrated_covariance(const Eigen::MatrixXd& R, const Eigen::MatrixXd& Sigma,
                                      double tau) {
    const Eigen::Index n = R.rows();
    if (tau < 0.0) throw numerical_error("integrated_covariance: tau must be >= 0");
    if (tau == 0.0) return Eigen::MatrixXd::Zero(n, n);

    const double rnorm = R.cwiseAbs().colwise().sum().maxCoeff();
    long panels = std::max<long>(64, static_cast<long>(std::ceil(256.0 * tau * rnorm)));
    if (panels % 2 != 0) ++panels;  // Simpson needs an even panel count
    const double h = tau / static_cast<double>(panels);

    // Incremental node exponentials: W_{i+1} = e^{-R h} W_i.
    const Eigen::MatrixXd Eh = matrix_exp(-R * h);
    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd acc = Sigma;  // endpoint weight 1 at u = 0
    Eigen::MatrixXd term(n, n);
    for (long i = 1; i < panels; ++i) {
        W = Eh * W;
        term.noalias() = W * Sigma * W.transpose();
        acc += (i % 2 == 1 ? 4.0 : 2.0) * term;
    }
    W = Eh * W;
    acc.noalias() += W * Sigma * W.transpose();  // endpoint u = tau

    return symmetrize(acc * (h / 3.0));
}

CovIntegral integrated_covariance(const OUParams& ou, double tau) {
    return CovIntegral{tau, integrated_covariance(ou.R, ou.Sigma, tau)};
}

bool psd_leq(const Eigen::MatrixXd& Mlow, const Eigen::MatrixXd& Mhigh, double tol) {
    return min_eigenvalue(symmetrize(Mhigh - Mlow)) >= -tol;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(M));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double rad = ev.cwiseAbs().maxCoeff();
    if (ev.minCoeff() < -kPsdRelTol * std::max(rad, 1e-300))
        throw numerical_error("sqrt_psd: matrix is not PSD (min eigenvalue " +
                              std::to_string(ev.minCoeff()) + ")");
    const Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(M));
    const Eigen::VectorXd& ev = es.eigenvalues();
    if (!(ev.minCoeff() > 0.0))
        throw numerical_error("inv_sqrt_spd: matrix is not positive definite");
    const Eigen::VectorXd root = ev.cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace mou

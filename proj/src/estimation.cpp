#include "mou/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "mou/matrix_kit.hpp"

namespace mou {

namespace {

double median_dt(const Eigen::VectorXd& times) {
    std::vector<double> dts;
    dts.reserve(static_cast<std::size_t>(times.size()) - 1);
    for (Eigen::Index i = 1; i < times.size(); ++i) dts.push_back(times[i] - times[i - 1]);
    std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
    return dts[dts.size() / 2];
}

void require_uniform(const MarketPath& path, double med) {
    for (Eigen::Index i = 1; i < path.times.size(); ++i) {
        const double dt = path.times[i] - path.times[i - 1];
        if (std::abs(dt - med) > 0.01 * med)
            throw validation_error("path is not uniformly sampled: step at row " +
                                   std::to_string(i) + " is " + std::to_string(dt) +
                                   " vs median " + std::to_string(med));
    }
}

}  // namespace

VAR1Fit fit_var1(const MarketPath& path) {
    path.validate();
    const Eigen::Index d = path.d();
    const Eigen::Index n = path.n() - 1;  // transitions
    if (n < d + 2)
        throw validation_error("fit_var1: need at least d + 2 transitions, got " +
                               std::to_string(n));
    const double dt = median_dt(path.times);
    require_uniform(path, dt);

    // Regressors Z = [1, S_k], responses Y = S_{k+1}.
    Eigen::MatrixXd Z(n, d + 1);
    Z.col(0).setOnes();
    Z.rightCols(d) = path.prices.topRows(n);
    const Eigen::MatrixXd Y = path.prices.bottomRows(n);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < d + 1) {
        // Pivot order exposes which columns are linearly dependent.
        const auto perm = qr.colsPermutation().indices();
        std::string cols;
        for (Eigen::Index i = qr.rank(); i < d + 1; ++i) {
            if (!cols.empty()) cols += ", ";
            const Eigen::Index c = perm[i];
            cols += (c == 0) ? "const" : ("S" + std::to_string(c));
        }
        throw numerical_error("fit_var1: rank-deficient regressors (collinear columns: " + cols +
                              ")");
    }

    const Eigen::MatrixXd coef = qr.solve(Y);  // (d+1) x d
    VAR1Fit fit;
    fit.a = coef.row(0).transpose();
    fit.Phi = coef.bottomRows(d).transpose();
    fit.dt = dt;
    fit.nObs = static_cast<int>(n);

    const Eigen::MatrixXd resid = Y - Z * coef;
    const double dof = static_cast<double>(n - d - 1);
    fit.Qres = symmetrize(resid.transpose() * resid / dof);

    fit.r2.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double ssr = resid.col(j).squaredNorm();
        const Eigen::VectorXd centered = Y.col(j).array() - Y.col(j).mean();
        const double sst = centered.squaredNorm();
        fit.r2[j] = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    }
    return fit;
}

OUParams var1_to_ou(const VAR1Fit& fit) {
    const Eigen::Index d = fit.Phi.rows();
    if (!(fit.dt > 0.0)) throw validation_error("var1_to_ou: dt must be positive");

    Eigen::EigenSolver<Eigen::MatrixXd> es(fit.Phi);
    if (es.info() != Eigen::Success)
        throw numerical_error("var1_to_ou: eigendecomposition of Phi failed");
    const Eigen::VectorXcd lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < d; ++i)
        if (!(lam[i].real() > 0.0))
            throw numerical_error(
                "var1_to_ou: matrix logarithm undefined (Phi eigenvalue with non-positive real "
                "part: " +
                std::to_string(lam[i].real()) + ")");

    const Eigen::MatrixXcd V = es.eigenvectors();
    Eigen::VectorXcd logLam(d);
    for (Eigen::Index i = 0; i < d; ++i) logLam[i] = std::log(lam[i]);
    const Eigen::MatrixXcd logPhi = V * logLam.asDiagonal() * V.inverse();

    const double scale = std::max(1.0, logPhi.cwiseAbs().maxCoeff());
    const double imag = logPhi.imag().cwiseAbs().maxCoeff();
    if (imag > 1e-8 * scale)
        throw numerical_error("var1_to_ou: matrix logarithm has imaginary residue " +
                              std::to_string(imag));

    const Eigen::MatrixXd R = -logPhi.real() / fit.dt;

    const Eigen::MatrixXd ImPhi = Eigen::MatrixXd::Identity(d, d) - fit.Phi;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ImPhi);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible())
        throw numerical_error("var1_to_ou: no stationary mean (unit root in Phi)");
    const Eigen::VectorXd Sbar = lu.solve(fit.a);

    return OUParams(R, Sbar, symmetrize(fit.Qres / fit.dt));
}

Eigen::MatrixXd fit_bachelier(const MarketPath& path) {
    path.validate();
    const Eigen::Index d = path.d();
    const Eigen::Index n = path.n() - 1;
    if (n < d + 2)
        throw validation_error("fit_bachelier: need at least d + 2 increments, got " +
                               std::to_string(n));
    const double dt = median_dt(path.times);
    require_uniform(path, dt);

    Eigen::MatrixXd inc = path.prices.bottomRows(n) - path.prices.topRows(n);
    inc.rowwise() -= inc.colwise().mean();
    return symmetrize(inc.transpose() * inc / (static_cast<double>(n - 1) * dt));
}

namespace {

// 95% trace-test critical values ("constant, no trend" case), indexed by the
// number of common trends d - r = 1..5.
constexpr double kTraceCv95[6] = {0.0, 3.8415, 15.4943, 29.7961, 47.8545, 69.8189};

}  // namespace

JohansenResult johansen_trace(const MarketPath& path) {
    path.validate();
    const Eigen::Index d = path.d();
    if (d < 1 || d > 5)
        throw validation_error("johansen_trace: supported dimensions are 1..5, got " +
                               std::to_string(d));
    const Eigen::Index n = path.n() - 1;  // VECM equations
    if (path.n() < 10 * d)
        throw validation_error("johansen_trace: need at least 10 d observations");

    // VECM with constant: dS_t = a + Pi S_{t-1} + eps. Partial out the
    // constant, then solve the canonical-correlation eigenproblem between the
    // differences and the levels. The level regressor is taken at the right
    // endpoint of each difference interval, matching the convention of the
    // reference implementations these critical values are quoted against.
    Eigen::MatrixXd Z0 = path.prices.bottomRows(n) - path.prices.topRows(n);
    Eigen::MatrixXd Z1 = path.prices.bottomRows(n);
    Z0.rowwise() -= Z0.colwise().mean();
    Z1.rowwise() -= Z1.colwise().mean();

    const double nn = static_cast<double>(n);
    const Eigen::MatrixXd S00 = symmetrize(Z0.transpose() * Z0 / nn);
    const Eigen::MatrixXd S11 = symmetrize(Z1.transpose() * Z1 / nn);
    const Eigen::MatrixXd S01 = Z0.transpose() * Z1 / nn;

    const double s00scale = std::max(spectral_radius(S00), 1e-300);
    const double s11scale = std::max(spectral_radius(S11), 1e-300);
    if (min_eigenvalue(S00) < 1e-12 * s00scale || min_eigenvalue(S11) < 1e-12 * s11scale)
        throw numerical_error("johansen_trace: degenerate covariance");

    Eigen::MatrixXd S11mh;
    try {
        S11mh = inv_sqrt_spd(S11);
    } catch (const numerical_error&) {
        throw numerical_error("johansen_trace: degenerate covariance");
    }
    const Eigen::MatrixXd S00inv = S00.llt().solve(Eigen::MatrixXd::Identity(d, d));
    const Eigen::MatrixXd M =
        symmetrize(S11mh * S01.transpose() * S00inv * S01 * S11mh);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    // Ascending from Eigen; flip to descending.
    Eigen::VectorXd lam(d);
    Eigen::MatrixXd beta(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        lam[i] = std::min(std::max(es.eigenvalues()[d - 1 - i], 0.0), 1.0 - 1e-15);
        beta.col(i) = S11mh * es.eigenvectors().col(d - 1 - i);
    }

    JohansenResult res;
    res.eigenvalues = lam;
    res.traceStats.resize(d);
    res.criticalValues95.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        double s = 0.0;
        for (Eigen::Index i = k; i < d; ++i) s += std::log1p(-lam[i]);
        res.traceStats[k] = -nn * s;
        res.criticalValues95[k] = kTraceCv95[d - k];
    }

    res.selectedRank = static_cast<int>(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        if (res.traceStats[k] < res.criticalValues95[k]) {
            res.selectedRank = static_cast<int>(k);
            break;
        }
    }

    res.cointVectors.resize(d, res.selectedRank);
    for (int j = 0; j < res.selectedRank; ++j) {
        Eigen::VectorXd v = beta.col(j);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        v /= v.norm() * (v[imax] < 0 ? -1.0 : 1.0);
        res.cointVectors.col(j) = v;
    }
    return res;
}

}  // namespace mou

#include "mou/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include "mou/matrix_kit.hpp"

namespace mou {

GaussianStream::GaussianStream(std::uint64_t master, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    rng_.seed(seq);
}

double GaussianStream::next() {
    if (haveSpare_) {
        haveSpare_ = false;
        return spare_;
    }
    // Box-Muller on uniforms in (0, 1]; explicit so the draw sequence does not
    // depend on the standard library's distribution internals.
    constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * kInv53;
    const double u2 = static_cast<double>(rng_() >> 11) * kInv53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = kTwoPi * u2;
    spare_ = r * std::sin(angle);
    haveSpare_ = true;
    return r * std::cos(angle);
}

void GaussianStream::fill(Eigen::VectorXd& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = next();
}

namespace {

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();

    // Semi-definite or slightly indefinite from rounding: eigenvalue root.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(cov));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double rad = ev.cwiseAbs().maxCoeff();
    if (ev.minCoeff() < -kPsdRelTol * std::max(rad, 1e-300))
        throw numerical_error("covariance factor: matrix is not PSD (min eigenvalue " +
                              std::to_string(ev.minCoeff()) + ")");
    return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

OUTransition::OUTransition(const OUParams& ou, double dt) : Sbar_(ou.Sbar) {
    if (dt < 0.0) throw validation_error("OUTransition: dt must be >= 0");
    const Eigen::Index d = ou.d;
    if (dt == 0.0) {
        decay_ = Eigen::MatrixXd::Identity(d, d);
        noiseFactor_ = Eigen::MatrixXd::Zero(d, d);
        return;
    }
    decay_ = matrix_exp(-ou.R * dt);
    noiseFactor_ = covariance_factor(integrated_covariance(ou.R, ou.Sigma, dt));
}

Eigen::VectorXd OUTransition::step(const Eigen::VectorXd& S, const Eigen::VectorXd& noise) const {
    return Sbar_ + decay_ * (S - Sbar_) + noiseFactor_ * noise;
}

void OUTransition::step_inplace(Eigen::VectorXd& S, const Eigen::VectorXd& noise) const {
    S = Sbar_ + decay_ * (S - Sbar_) + noiseFactor_ * noise;
}

Eigen::VectorXd ou_step_exact(const OUParams& ou, const Eigen::VectorXd& S, double dt,
                              const Eigen::VectorXd& noise) {
    return OUTransition(ou, dt).step(S, noise);
}

namespace {

TimeGrid grid_from_path(const MarketPath& path) {
    const Eigen::Index n = path.times.size();
    const double T = path.times[n - 1] - path.times[0];
    const double dt = T / static_cast<double>(n - 1);
    for (Eigen::Index i = 1; i < n; ++i) {
        const double step = path.times[i] - path.times[i - 1];
        if (std::abs(step - dt) > 0.01 * dt)
            throw validation_error("rollout: price path is not uniformly sampled at row " +
                                   std::to_string(i));
    }
    return TimeGrid(T, static_cast<int>(n - 1));
}

// Shared per-step update. Prices at the next instant are supplied by the
// caller (historical row or simulated step).
struct RolloutEngine {
    const ExecutionSpec& exec;
    double dt;

    void advance(double t, const Control& control, Eigen::VectorXd& q, Eigen::VectorXd& S,
                 Eigen::VectorXd& Stilde, double& X, double& Xfund, Eigen::VectorXd& v,
                 const Eigen::VectorXd& Snext) const {
        control(t, q, S, v);
        if (!v.allFinite())
            throw numerical_error("rollout: control produced a non-finite rate at t = " +
                                  std::to_string(t));
        const Eigen::VectorXd impact = exec.K * (v * dt);
        const Eigen::VectorXd StildeNext = Stilde + (Snext - S) + impact;
        const double cost = v.dot(exec.eta * v) * dt;
        // Fills at the average of pre- and post-step prices; this makes the
        // market-vs-fundamental accounting identity exact pathwise.
        X -= 0.5 * v.dot(Stilde + StildeNext) * dt + cost;
        Xfund -= 0.5 * v.dot(S + Snext) * dt + cost;
        q += v * dt;
        S = Snext;
        Stilde = StildeNext;
    }
};

void check_initial(const ExecutionState& initial, Eigen::Index d) {
    if (initial.q.size() != d || initial.S.size() != d || initial.Stilde.size() != d)
        throw validation_error("rollout: initial state dimension mismatch");
    if (!initial.q.allFinite() || !initial.S.allFinite() || !initial.Stilde.allFinite() ||
        !std::isfinite(initial.X))
        throw validation_error("rollout: initial state has non-finite entries");
}

}  // namespace

ExecutionTrace rollout(const Control& control, const OUParams& ou, const ExecutionSpec& exec,
                       const ExecutionState& initial, const MarketPath& path) {
    path.validate();
    if (path.d() != ou.d) throw validation_error("rollout: path dimension does not match model");
    check_initial(initial, ou.d);
    const TimeGrid grid = grid_from_path(path);
    if (grid.T > exec.T * (1.0 + 1e-9))
        throw validation_error("rollout: path horizon exceeds the strategy horizon");

    const Eigen::Index d = ou.d;
    const int N = grid.N;
    ExecutionTrace tr;
    tr.grid = grid;
    tr.q.resize(N + 1, d);
    tr.v.resize(N, d);
    tr.S.resize(N + 1, d);
    tr.Stilde.resize(N + 1, d);
    tr.X.resize(N + 1);
    tr.Xfund.resize(N + 1);
    tr.pnl.resize(N + 1);

    Eigen::VectorXd q = initial.q, S = path.prices.row(0).transpose(), Stilde = initial.Stilde;
    double X = initial.X, Xfund = initial.X;
    const double mtm0 = X + q.dot(Stilde);

    RolloutEngine engine{exec, grid.dt()};
    Eigen::VectorXd v(d);
    for (int k = 0; k <= N; ++k) {
        tr.q.row(k) = q.transpose();
        tr.S.row(k) = S.transpose();
        tr.Stilde.row(k) = Stilde.transpose();
        tr.X[k] = X;
        tr.Xfund[k] = Xfund;
        tr.pnl[k] = X + q.dot(Stilde) - mtm0;
        if (!std::isfinite(tr.pnl[k]))
            throw numerical_error("rollout: non-finite state at step " + std::to_string(k));
        if (k == N) break;
        const Eigen::VectorXd Snext = path.prices.row(k + 1).transpose();
        engine.advance(grid.times[static_cast<std::size_t>(k)], control, q, S, Stilde, X, Xfund, v,
                       Snext);
        tr.v.row(k) = v.transpose();
    }
    return tr;
}

ExecutionTrace rollout_simulated(const Control& control, const OUParams& ou,
                                 const ExecutionSpec& exec, const ExecutionState& initial,
                                 const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream) {
    check_initial(initial, ou.d);
    const OUTransition kernel(ou, grid.dt());
    GaussianStream gauss(seed, stream);

    MarketPath path;
    path.times.resize(grid.N + 1);
    path.prices.resize(grid.N + 1, ou.d);
    Eigen::VectorXd S = initial.S;
    Eigen::VectorXd z(ou.d);
    for (int k = 0; k <= grid.N; ++k) {
        path.times[k] = grid.times[static_cast<std::size_t>(k)];
        path.prices.row(k) = S.transpose();
        if (k == grid.N) break;
        gauss.fill(z);
        kernel.step_inplace(S, z);
    }
    return rollout(control, ou, exec, initial, path);
}

namespace {

PathOutcome run_terminal_path(const Control& control, const OUTransition& kernel,
                              const ExecutionSpec& exec, const ExecutionState& initial,
                              const TimeGrid& grid, GaussianStream& gauss) {
    const Eigen::Index d = initial.q.size();
    Eigen::VectorXd q = initial.q, S = initial.S, Stilde = initial.Stilde;
    double X = initial.X, Xfund = initial.X;
    const double mtm0 = X + q.dot(Stilde);

    RolloutEngine engine{exec, grid.dt()};
    Eigen::VectorXd v(d), z(d), Snext(d);
    for (int k = 0; k < grid.N; ++k) {
        gauss.fill(z);
        Snext = kernel.step(S, z);
        engine.advance(grid.times[static_cast<std::size_t>(k)], control, q, S, Stilde, X, Xfund, v,
                       Snext);
    }
    PathOutcome out;
    out.pnl = X + q.dot(Stilde) - mtm0;
    out.wealth = X + q.dot(Stilde) - q.dot(exec.GammaTilde * q);
    if (!std::isfinite(out.pnl) || !std::isfinite(out.wealth))
        throw numerical_error("monte carlo: non-finite terminal state");
    return out;
}

}  // namespace

std::vector<PathOutcome> monte_carlo_outcomes(const Control& control, const OUParams& ou,
                                              const ExecutionSpec& exec,
                                              const ExecutionState& initial, const TimeGrid& grid,
                                              const MonteCarloConfig& cfg) {
    if (cfg.nPaths < 1) throw validation_error("monte carlo: nPaths must be >= 1");
    check_initial(initial, ou.d);
    const OUTransition kernel(ou, grid.dt());

    std::vector<PathOutcome> outcomes(static_cast<std::size_t>(cfg.nPaths));
    unsigned hw = std::thread::hardware_concurrency();
    int nThreads = cfg.nThreads > 0 ? cfg.nThreads : static_cast<int>(hw ? hw : 1);
    nThreads = std::min(nThreads, cfg.nPaths);

    std::exception_ptr firstError = nullptr;
    std::mutex errMutex;
    auto worker = [&](int tid) {
        try {
            for (int i = tid; i < cfg.nPaths; i += nThreads) {
                GaussianStream gauss(cfg.seed, static_cast<std::uint64_t>(i));
                outcomes[static_cast<std::size_t>(i)] =
                    run_terminal_path(control, kernel, exec, initial, grid, gauss);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(errMutex);
            if (!firstError) firstError = std::current_exception();
        }
    };

    if (nThreads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nThreads));
        for (int t = 0; t < nThreads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }
    if (firstError) std::rethrow_exception(firstError);
    return outcomes;
}

PnLSummary monte_carlo_pnl(const Control& control, const OUParams& ou, const ExecutionSpec& exec,
                           const ExecutionState& initial, const TimeGrid& grid,
                           const MonteCarloConfig& cfg) {
    const auto outcomes = monte_carlo_outcomes(control, ou, exec, initial, grid, cfg);
    const int n = cfg.nPaths;

    PnLSummary s;
    s.nPaths = n;
    s.seed = cfg.seed;

    double mean = 0.0;
    for (const auto& o : outcomes) mean += o.pnl;
    mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (const auto& o : outcomes) {
        const double dlt = o.pnl - mean;
        m2 += dlt * dlt;
        m3 += dlt * dlt * dlt;
    }
    s.mean = mean;
    s.stdev = n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0;
    s.skewness = m2 > 0.0 ? (m3 / n) / std::pow(m2 / n, 1.5) : 0.0;

    const int bins = std::max(cfg.histogramBins, 1);
    const double width = s.stdev > 0.0 ? 8.0 * s.stdev / bins : 1.0;
    const double left = mean - 4.0 * std::max(s.stdev, width / 8.0);
    s.binEdges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) s.binEdges[b] = left + b * width;
    s.counts = Eigen::VectorXi::Zero(bins);
    for (const auto& o : outcomes) {
        int b = static_cast<int>(std::floor((o.pnl - left) / width));
        b = std::min(std::max(b, 0), bins - 1);  // clamp outliers into edge bins
        ++s.counts[b];
    }
    return s;
}

}  // namespace mou

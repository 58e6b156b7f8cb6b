#include "fieldfuse/bayes.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>

namespace fieldfuse {

BayesSolver resolve_solver(BayesSolver s, int n) {
    if (s != BayesSolver::Auto) return s;
    return n <= kPrecisionMaxCells ? BayesSolver::Precision : BayesSolver::Gain;
}

namespace {

enum class CovMode { None, Diag, Full };

struct Posterior {
    Vec y;
    Vec diag;
    std::optional<Mat> full;
    double residual = 0.0;
    BayesSolver used = BayesSolver::Precision;
};

void check_inputs(const QoIMeasurement& z, const OutputOperator& op, const PriorSpec& prior) {
    if (z.z.size() != op.m()) throw ArgumentError("QoI vector length does not match operator");
    if (prior.n() != op.n()) throw ArgumentError("prior dimension does not match operator");
    if (!(z.tau2 > 0.0)) throw ArgumentError("tau2 must be > 0");
    if (!z.z.allFinite()) throw DataError("QoI measurement has non-finite entries");
}

Posterior precision_route(const QoIMeasurement& z, const OutputOperator& op,
                          const PriorSpec& prior, CovMode mode) {
    const int n = op.n();
    Mat S = prior.dense_cov();
    Eigen::LLT<Mat> sl(S);
    if (sl.info() != Eigen::Success)
        throw NumericalError("prior covariance factorization failed; increase the nugget");
    Mat Sinv = sl.solve(Mat::Identity(n, n));
    Sinv = 0.5 * (Sinv + Sinv.transpose());

    Mat A = op.H * op.H.transpose() / z.tau2 + Sinv;
    Vec rhs = op.H * (z.z - op.offset) / z.tau2 + Sinv * prior.mean;
    Eigen::LLT<Mat> al(A);
    if (al.info() != Eigen::Success) throw NumericalError("posterior precision is not positive definite");

    Posterior p;
    p.used = BayesSolver::Precision;
    p.y = al.solve(rhs);
    double rn = rhs.norm();
    p.residual = (A * p.y - rhs).norm() / (rn > 0.0 ? rn : 1.0);
    if (mode != CovMode::None) {
        // Gamma = L^-T L^-1, so diag(Gamma)_i is the squared norm of column i of L^-1
        Mat Linv = al.matrixL().solve(Mat::Identity(n, n));
        p.diag = Linv.colwise().squaredNorm().transpose();
        if (mode == CovMode::Full) p.full = Linv.transpose() * Linv;
    }
    return p;
}

Posterior gain_route(const QoIMeasurement& z, const OutputOperator& op, const PriorSpec& prior,
                     CovMode mode) {
    const int m = op.m();
    Mat G = prior.cov_mul(op.H);
    Mat K = op.H.transpose() * G + z.tau2 * Mat::Identity(m, m);
    Eigen::LLT<Mat> kl(K);
    if (kl.info() != Eigen::Success) throw NumericalError("innovation covariance is not positive definite");
    Posterior p;
    p.used = BayesSolver::Gain;
    Vec innov = z.z - op.offset - op.H.transpose() * prior.mean;
    p.y = prior.mean + G * kl.solve(innov);
    if (mode != CovMode::None) {
        Mat GK = kl.solve(G.transpose()).transpose();  // G K^-1
        p.diag = (prior.cov_diag() - G.cwiseProduct(GK).rowwise().sum()).cwiseMax(0.0);
        if (mode == CovMode::Full) {
            Mat F = prior.dense_cov() - GK * G.transpose();
            p.full = 0.5 * (F + F.transpose());
        }
    }
    return p;
}

Posterior solve_posterior(const QoIMeasurement& z, const OutputOperator& op,
                          const PriorSpec& prior, BayesSolver solver, CovMode mode) {
    check_inputs(z, op, prior);
    BayesSolver s = resolve_solver(solver, op.n());
    if (s == BayesSolver::Gain) return gain_route(z, op, prior, mode);
    Posterior p = precision_route(z, op, prior, mode);
    if (p.residual > 1e-8) {
        // ill-conditioned Sigma^-1 (large length scale); Woodbury avoids it
        if (solver == BayesSolver::Auto) return gain_route(z, op, prior, mode);
        throw NumericalError("precision solve residual " + std::to_string(p.residual) +
                             " exceeds 1e-8");
    }
    return p;
}

}  // namespace

Vec map_estimate(const QoIMeasurement& z, const OutputOperator& op, const PriorSpec& prior,
                 BayesSolver solver, double* residual) {
    Posterior p = solve_posterior(z, op, prior, solver, CovMode::None);
    if (residual) *residual = p.residual;
    return p.y;
}

Mat posterior_covariance(const OutputOperator& op, double tau2, const PriorSpec& prior,
                         bool diag_only, BayesSolver solver) {
    QoIMeasurement z{Vec::Zero(op.m()), tau2};
    Posterior p = solve_posterior(z, op, prior, solver, diag_only ? CovMode::Diag : CovMode::Full);
    if (diag_only) return p.diag;
    return *p.full;
}

double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

std::pair<Vec, Vec> confidence_bands(const BayesResult& r, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must lie in (0, 1)");
    if (r.cov_diag.size() != r.y_map.size()) throw ArgumentError("result has no covariance diagonal");
    double q = normal_quantile(0.5 + 0.5 * level);
    Vec half = q * r.cov_diag.cwiseMax(0.0).cwiseSqrt();
    return {r.y_map - half, r.y_map + half};
}

Mat sample_posterior(const BayesResult& r, int count, std::uint64_t seed) {
    if (!r.full_cov) throw ArgumentError("posterior sampling needs the full covariance");
    return sample_gaussian(r.y_map, *r.full_cov, count, seed, false);
}

BayesResult run_bayesian_fusion(const Vec& mu1, const Vec& mu2, const QoIMeasurement& z,
                                const OutputOperator& op, const SurfaceGrid& grid,
                                const BayesOptions& opt) {
    const auto& g = opt.gamma;
    if (!(g.sigma1_sq >= 0.0 && g.sigma2_sq >= 0.0)) throw ArgumentError("variances must be >= 0");
    BayesResult r;
    r.theta = opt.theta ? *opt.theta : estimate_theta(mu1, mu2, op, z.z);
    r.mu_tilde = fuse_prior_mean(mu1, mu2, r.theta);
    r.sigma2 = combined_variance(r.theta, g.sigma1_sq, g.sigma2_sq);
    PriorSpec prior = make_prior(r.mu_tilde, grid, r.theta, r.sigma2, g.ell, g.nugget);

    const bool diag_only = opt.diag_only.value_or(op.n() > kPrecisionMaxCells);
    QoIMeasurement zz{z.z, z.tau2};
    Posterior p = solve_posterior(zz, op, prior, opt.solver, diag_only ? CovMode::Diag : CovMode::Full);
    r.y_map = std::move(p.y);
    r.cov_diag = std::move(p.diag);
    r.full_cov = std::move(p.full);
    r.residual = p.residual;
    r.solver = p.used == BayesSolver::Precision ? "precision" : "gain";
    r.qoi_fit = apply_forward(op, r.y_map);
    r.misfit = (z.z - r.qoi_fit).norm();
    r.level = opt.level;
    std::tie(r.lower, r.upper) = confidence_bands(r, opt.level);
    return r;
}

double map_objective(const Vec& y, const QoIMeasurement& z, const OutputOperator& op,
                     const Mat& sigma_inv, const Vec& mean) {
    Vec r = z.z - op.offset - op.H.transpose() * y;
    Vec d = y - mean;
    return 0.5 * r.squaredNorm() / z.tau2 + 0.5 * d.dot(sigma_inv * d);
}

Vec map_gradient(const Vec& y, const QoIMeasurement& z, const OutputOperator& op,
                 const Mat& sigma_inv, const Vec& mean) {
    Vec r = z.z - op.offset - op.H.transpose() * y;
    return -op.H * r / z.tau2 + sigma_inv * (y - mean);
}

}  // namespace fieldfuse

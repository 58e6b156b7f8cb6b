#include "fieldfuse/prior.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fieldfuse {

void validate_sample(const FieldSample& s, int n) {
    if (s.values.size() != n) throw ArgumentError("field sample length does not match grid");
    if (!(s.variance >= 0.0)) throw ArgumentError("field sample variance must be >= 0");
    if (!s.values.allFinite()) throw DataError("field sample has non-finite values");
}

double estimate_theta(const Vec& mu1, const Vec& mu2, const OutputOperator& op, const Vec& z) {
    if (mu1.size() != op.n() || mu2.size() != op.n())
        throw ArgumentError("field length does not match operator");
    if (z.size() != op.m()) throw ArgumentError("QoI vector length does not match operator");
    Vec a = apply_forward(op, mu1);
    Vec b = apply_forward(op, mu2);
    Vec d = a - b;
    double dd = d.squaredNorm();
    if (dd < 1e-14) return 0.5;
    return std::clamp(d.dot(z - b) / dd, 0.0, 1.0);
}

Vec fuse_prior_mean(const Vec& mu1, const Vec& mu2, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ArgumentError("theta must lie in [0, 1]");
    if (mu1.size() != mu2.size()) throw ArgumentError("fields differ in length");
    return theta * mu1 + (1.0 - theta) * mu2;
}

double combined_variance(double theta, double s1, double s2) {
    if (!(s1 >= 0.0 && s2 >= 0.0)) throw ArgumentError("variances must be >= 0");
    return theta * theta * s1 + (1.0 - theta) * (1.0 - theta) * s2;
}

double se_kernel(double dist2, double sigma2, double ell) {
    return sigma2 * std::exp(-dist2 / (2.0 * ell * ell));
}

namespace {

void check_kernel_args(double sigma2, double ell, double nugget) {
    if (!(ell > 0.0)) throw ArgumentError("length scale must be > 0");
    if (!(sigma2 > 0.0)) throw ArgumentError("prior variance must be > 0");
    if (!(nugget >= 0.0)) throw ArgumentError("nugget must be >= 0");
}

Mat kernel_matrix(const Mat& X, double sigma2, double ell, double nugget) {
    const Eigen::Index n = X.rows();
    Mat S(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        S(j, j) = sigma2 * (1.0 + nugget);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double v = se_kernel((X.row(i) - X.row(j)).squaredNorm(), sigma2, ell);
            S(i, j) = v;
            S(j, i) = v;
        }
    }
    return S;
}

}  // namespace

Mat prior_covariance(const SurfaceGrid& grid, double sigma2, double ell, double nugget) {
    check_kernel_args(sigma2, ell, nugget);
    Mat S = kernel_matrix(grid.centers, sigma2, ell, nugget);
    Eigen::LLT<Mat> llt(S);
    if (llt.info() != Eigen::Success)
        throw NumericalError("prior covariance is not positive definite; increase the nugget");
    return S;
}

PriorSpec make_prior(const Vec& mean, const SurfaceGrid& grid, double theta, double sigma2,
                     double ell, double nugget) {
    check_kernel_args(sigma2, ell, nugget);
    if (mean.size() != grid.size()) throw ArgumentError("prior mean length does not match grid");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ArgumentError("theta must lie in [0, 1]");
    PriorSpec p;
    p.mean = mean;
    p.theta = theta;
    p.sigma2 = sigma2;
    p.length_scale = ell;
    p.nugget = nugget;
    p.coords = grid.centers;
    return p;
}

Mat PriorSpec::dense_cov() const {
    if (explicit_cov()) return cov;
    return kernel_matrix(coords, sigma2, length_scale, nugget);
}

Vec PriorSpec::cov_diag() const {
    if (explicit_cov()) return cov.diagonal();
    return Vec::Constant(n(), sigma2 * (1.0 + nugget));
}

Mat PriorSpec::cov_mul(const Mat& B) const {
    if (B.rows() != n()) throw ArgumentError("covariance product dimension mismatch");
    if (explicit_cov()) return cov * B;
    const int nn = n();
    Mat out(nn, B.cols());
    parallel_for(nn, [&](int i) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(B.cols());
        for (int j = 0; j < nn; ++j) {
            double k = (i == j) ? sigma2 * (1.0 + nugget)
                                : se_kernel((coords.row(i) - coords.row(j)).squaredNorm(),
                                            sigma2, length_scale);
            if (k != 0.0) acc += k * B.row(j);
        }
        out.row(i) = acc;
    });
    return out;
}

Mat sample_gaussian(const Vec& mean, const Mat& cov, int count, std::uint64_t seed, bool strict) {
    if (count < 0) throw ArgumentError("sample count must be >= 0");
    const Eigen::Index n = mean.size();
    if (cov.rows() != n || cov.cols() != n) throw ArgumentError("covariance shape mismatch");
    Mat L;
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
    } else if (strict) {
        throw NumericalError("covariance factorization failed; increase the nugget");
    } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(cov);
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
        L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat draws(count, n);
    Vec xi(n);
    for (int c = 0; c < count; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) xi(i) = nd(rng);
        draws.row(c) = (mean + L * xi).transpose();
    }
    return draws;
}

Mat sample_prior(const PriorSpec& spec, int count, std::uint64_t seed) {
    return sample_gaussian(spec.mean, spec.dense_cov(), count, seed, true);
}

}  // namespace fieldfuse

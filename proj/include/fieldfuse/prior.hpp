#pragma once

#include "fieldfuse/common.hpp"
#include "fieldfuse/geometry.hpp"

#include <cstdint>

namespace fieldfuse {

struct FieldSample {
    Vec values;
    double variance = 0.0;
    Fidelity fidelity = Fidelity::Simulation;
    FlightCondition condition;
};

void validate_sample(const FieldSample& s, int n);

// Prior N(mean, Sigma). Sigma is either given explicitly (cov) or implied by
// the squared-exponential kernel over coords; the implicit form lets large
// grids avoid the n x n matrix.
struct PriorSpec {
    Vec mean;
    double theta = 0.5;
    double sigma2 = 0.0;
    double length_scale = 0.0;
    double nugget = 1e-10;
    Mat coords;
    Mat cov;

    int n() const { return static_cast<int>(mean.size()); }
    bool explicit_cov() const { return cov.size() > 0; }
    Mat dense_cov() const;
    Vec cov_diag() const;
    Mat cov_mul(const Mat& B) const;
};

double estimate_theta(const Vec& mu1, const Vec& mu2, const OutputOperator& op, const Vec& z);

Vec fuse_prior_mean(const Vec& mu1, const Vec& mu2, double theta);

double combined_variance(double theta, double sigma1_sq, double sigma2_sq);

double se_kernel(double dist2, double sigma2, double ell);

// Dense kernel matrix; throws NumericalError if Cholesky fails.
Mat prior_covariance(const SurfaceGrid& grid, double sigma2, double ell, double nugget = 1e-10);

// Kernel-backed prior that is not materialized.
PriorSpec make_prior(const Vec& mean, const SurfaceGrid& grid, double theta, double sigma2,
                     double ell, double nugget = 1e-10);

// count x n draws mean + L xi.
Mat sample_prior(const PriorSpec& spec, int count, std::uint64_t seed);

// Draws from N(mean, cov) using a Cholesky factor, falling back to a
// clipped eigendecomposition when cov is only semidefinite in floating point.
Mat sample_gaussian(const Vec& mean, const Mat& cov, int count, std::uint64_t seed, bool strict);

}  // namespace fieldfuse

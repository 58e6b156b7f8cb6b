#pragma once

#include "fieldfuse/common.hpp"
#include "fieldfuse/geometry.hpp"
#include "fieldfuse/prior.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

namespace fieldfuse {

struct QoIMeasurement {
    Vec z;
    double tau2 = 1e-6;
};

// Precision: factor A = H H^T / tau2 + Sigma^-1 (n x n).
// Gain: the algebraically identical Woodbury form, which only needs Sigma H
// and an m x m solve. Auto picks precision up to 2000 cells.
enum class BayesSolver { Auto, Precision, Gain };

struct Hyperparameters {
    double sigma1_sq = 1e-2;
    double sigma2_sq = 1e-2;
    double tau2 = 1e-6;
    double ell = 1e-4;
    double nugget = 1e-10;
};

struct BayesOptions {
    Hyperparameters gamma;
    std::optional<double> theta;  // pinned theta; estimated when empty
    std::optional<bool> diag_only;  // default: true above 2000 cells
    BayesSolver solver = BayesSolver::Auto;
    double level = 0.95;
};

struct BayesResult {
    Vec y_map;
    Vec cov_diag;
    std::optional<Mat> full_cov;
    double theta = 0.5;
    double sigma2 = 0.0;
    Vec mu_tilde;
    Vec qoi_fit;
    double misfit = 0.0;
    Vec lower, upper;
    double level = 0.95;
    std::string solver;
    double residual = 0.0;  // relative residual of the precision solve (0 for gain)
};

constexpr int kPrecisionMaxCells = 2000;

BayesSolver resolve_solver(BayesSolver s, int n);

Vec map_estimate(const QoIMeasurement& z, const OutputOperator& op, const PriorSpec& prior,
                 BayesSolver solver = BayesSolver::Auto, double* residual = nullptr);

// Returns the full Gamma, or an n x 1 matrix holding its diagonal.
Mat posterior_covariance(const OutputOperator& op, double tau2, const PriorSpec& prior,
                         bool diag_only, BayesSolver solver = BayesSolver::Auto);

double normal_quantile(double p);

std::pair<Vec, Vec> confidence_bands(const BayesResult& r, double level);

Mat sample_posterior(const BayesResult& r, int count, std::uint64_t seed);

BayesResult run_bayesian_fusion(const Vec& mu1, const Vec& mu2, const QoIMeasurement& z,
                                const OutputOperator& op, const SurfaceGrid& grid,
                                const BayesOptions& opt);

// Negative log posterior (up to a constant) and its gradient; used as the
// reference objective by tests and diagnostics.
double map_objective(const Vec& y, const QoIMeasurement& z, const OutputOperator& op,
                     const Mat& sigma_inv, const Vec& mean);
Vec map_gradient(const Vec& y, const QoIMeasurement& z, const OutputOperator& op,
                 const Mat& sigma_inv, const Vec& mean);

}  // namespace fieldfuse

#pragma once

#include "fieldfuse/common.hpp"
#include "fieldfuse/geometry.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fieldfuse {

struct SnapshotSet {
    Mat U;  // n x q
    std::vector<FlightCondition> conditions;
    std::vector<Fidelity> fidelity;

    int n() const { return static_cast<int>(U.rows()); }
    int q() const { return static_cast<int>(U.cols()); }
};

void validate_snapshots(const SnapshotSet& s);

struct PodBasis {
    Mat phi;  // all left singular vectors (n x q)
    Vec d;    // singular values, nonincreasing
    int k = 0;
    double energy_fraction = 1.0;

    Mat phi_k() const { return phi.leftCols(k); }
};

PodBasis compute_pod(const Mat& U);
PodBasis compute_pod(const SnapshotSet& s);

// Smallest k with sum(d[0..k)) / sum(d) >= target, first-power d.
int truncate_rank(const Vec& d, double target = 0.99);

PodBasis truncate(PodBasis b, double target = 0.99);

struct KktSolution {
    Vec a;
    Vec lambda;
    double residual = 0.0;  // relative residual of the saddle system
};

KktSolution solve_kkt(const Mat& phi_k, const OutputOperator& op, const Vec& z, const Vec& u_guess);

// The assembled (k+m) x (k+m) saddle matrix, for diagnostics.
Mat kkt_matrix(const Mat& phi_k, const OutputOperator& op);

struct CpodOptions {
    int c = 5;
    double eps_c = 1e-6;
    int max_iter = 50;
    double energy = 0.99;
};

struct CpodResult {
    Vec u_fused;
    Vec a;
    Vec lambda;
    std::vector<double> cost_history;
    std::vector<int> rank_history;
    double theta_init = 0.0;
    int iterations = 0;
    bool converged = false;
    double orthonormality_error = 0.0;  // worst over iterations
};

// Variance of the last c costs; negative when fewer than c are available.
double cost_dispersion(const std::vector<double>& J, int c);

CpodResult run_cpod(const SnapshotSet& snapshots, const Vec& u_cfd, const Vec& u_wt, const Vec& z,
                    const OutputOperator& op, double theta_init, const CpodOptions& opt = {});

struct CpodEnsemble {
    Vec mean;
    Vec cov_diag;
    Vec lower, upper;
    int T_requested = 0;
    int T = 0;
    int nu = 0;
    double beta = 0.05;
    double t_quantile = 0.0;
    std::vector<double> thetas;
    std::vector<CpodResult> runs;                         // successful replicates, by index
    std::vector<std::pair<int, std::string>> failures;    // replicate index, reason
};

// Two-sided Student-t quantile: P(|t_nu| <= q) = 1 - beta.
double student_t_quantile(double beta, int nu);

CpodEnsemble cpod_ensemble(const SnapshotSet& snapshots, const Vec& u_cfd, const Vec& u_wt,
                           const Vec& z, const OutputOperator& op, int T = 1000,
                           double beta = 0.05, std::uint64_t seed = 0, const CpodOptions& opt = {});

}  // namespace fieldfuse
